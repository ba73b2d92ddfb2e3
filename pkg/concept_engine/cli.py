"""
Concept Engine CLI - Pipeline Command Line

Subcommands run one pipeline stage each and print a short formatted summary.
Fatal errors print a single ``ERROR <code>: <message>`` line on stderr and
exit with the code of the failing stage.

Usage: python -m concept_engine.cli <command> [args] [--seed N] [--config FILE] ...
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

from concept_engine.config import PipelineConfig, load_config
from concept_engine.engine import ConceptEngine
from concept_engine.errors import ConceptEngineError, ConfigError, DatasetError, ExtractionError
from database.dataset_operations import export_csv, export_json
from knowledge.knowledge_base import KnowledgeBase, pyramid_frame
from knowledge.substitution import heatmap_table, load_queries, render_heatmap, render_results, save_queries

STATS_FILES = {
    "variance": "variance_table.csv",
    "correlation": "correlation.csv",
    "coverage": "coverage.csv",
}


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors raise ConfigError instead of printing usage and exiting."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


class ConceptCLI:
    """
    Command-line front end of the ConceptEngine.

    Commands:
    - scene / simulate: synthetic scene file and feature bundles
    - extract: bundles (or a dataset file) to the canonical dataset CSV
    - stats: variance, correlation and coverage tables
    - build-kb / pyramid: knowledge base and partition pyramid
    - queries / query: substitution query batches and their rankings
    """

    def __init__(self):
        self.engine: Optional[ConceptEngine] = None

    def run(self, argv: Optional[List[str]] = None) -> int:
        """Parse arguments, run one command and return the process exit code."""
        try:
            args = self._build_parser().parse_args(argv)
            logging.basicConfig(
                level=logging.DEBUG if args.verbose else logging.WARNING,
                format="%(levelname)s %(name)s: %(message)s",
            )
            config = load_config(args.config).with_overrides(
                seed=args.seed, eta=args.eta, variance=args.variance, threshold=args.threshold
            )
            self.engine = ConceptEngine(config)
            handler = getattr(self, f"_cmd_{args.command.replace('-', '_')}")
            handler(args)
            return 0
        except ConceptEngineError as e:
            print(e.one_line(), file=sys.stderr)
            return e.exit_code
        except Exception as e:
            message = " ".join(str(e).split()) or type(e).__name__
            print(f"ERROR E_INTERNAL: {message}", file=sys.stderr)
            return 1

    # =========================================================================
    # Argument Parsing
    # =========================================================================

    def _build_parser(self) -> _ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--seed", type=int, help="Root seed of every random stream")
        common.add_argument("--config", help="Config file (dotted KEY=value lines)")
        common.add_argument("--eta", type=int, help="Cluster count for every property")
        common.add_argument("--variance", choices=["population", "sample"], help="Variance flavour")
        common.add_argument("--threshold", type=float, help="Substitution selection threshold")
        common.add_argument("--out", help="Output file or directory")
        common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

        parser = _ArgumentParser(
            prog="concept_engine",
            description="Robot-centric object property extraction and conceptual knowledge.",
        )
        sub = parser.add_subparsers(dest="command", required=True)

        p = sub.add_parser("scene", parents=[common], help="Write the synthetic household scene file")
        p.add_argument("--instances", type=int, default=10, help="Instances per class")

        p = sub.add_parser("simulate", parents=[common], help="Synthesize feature bundles from a scene")
        p.add_argument("scene", nargs="?", help="Scene file")
        p.add_argument("--repetitions", type=int, help="Bundles per object")

        p = sub.add_parser("extract", parents=[common], help="Extract a dataset from bundles")
        p.add_argument("source", nargs="?", help="Bundle directory or dataset file")
        p.add_argument("--workers", type=int, help="Concurrent extractions")
        p.add_argument("--json", action="store_true", help="Also write a JSON copy of the dataset")

        p = sub.add_parser("stats", parents=[common], help="Variance, correlation and coverage tables")
        p.add_argument("dataset", nargs="?", help="Dataset file")

        p = sub.add_parser("build-kb", parents=[common], help="Build the knowledge base")
        p.add_argument("dataset", nargs="?", help="Dataset file")

        p = sub.add_parser("pyramid", parents=[common], help="Partition pyramid over a property")
        p.add_argument("dataset", nargs="?", help="Dataset file")
        p.add_argument("--feature", default="containment", help="Property or 'physical'")
        p.add_argument("--k-min", type=int, default=2)
        p.add_argument("--k-max", type=int, help="Defaults to the number of classes")

        p = sub.add_parser("queries", parents=[common], help="Generate one substitution query per class")
        p.add_argument("kb", nargs="?", help="Knowledge base file")

        p = sub.add_parser("query", parents=[common], help="Rank substitutes for missing classes")
        p.add_argument("kb", nargs="?", help="Knowledge base file")
        p.add_argument("query", nargs="?", help="Query file")
        p.add_argument("--heatmap", help="Also write the similarity heat map CSV here")
        p.add_argument("--skip-unknown", action="store_true", help="Skip queries naming classes the KB lacks")
        return parser

    def _path(self, value: Optional[str], fallback: Optional[str], what: str) -> str:
        path = value or fallback
        if not path:
            raise ConfigError(f"no {what} given (argument or paths.{what} in the config)")
        return path

    @property
    def config(self) -> PipelineConfig:
        return self.engine.config

    # =========================================================================
    # Commands
    # =========================================================================

    def _cmd_scene(self, args):
        out = self._path(args.out, self.config.paths.scene, "scene")
        objects = self.engine.write_scene(out, args.instances)
        self._display_header("SCENE")
        classes = sorted({o.class_label for o in objects})
        print(f"✅ {len(objects)} objects in {len(classes)} classes → {out}")

    def _cmd_simulate(self, args):
        scene = self._path(args.scene, self.config.paths.scene, "scene")
        out = self._path(args.out, self.config.paths.bundles, "bundles")
        written = self.engine.simulate(scene, out, args.repetitions)
        self._display_header("SIMULATE")
        print(f"✅ {len(written)} bundles → {out} ({self.engine.last_duration:.1f}s)")

    def _cmd_extract(self, args):
        source = self._path(args.source, self.config.paths.bundles, "bundles")
        out = self._path(args.out, self.config.paths.dataset, "dataset")
        records, failures = self.engine.load_records(source, args.workers)
        if not records:
            if failures:
                raise ExtractionError(f"none of the {len(failures)} bundles under {source} could be extracted")
            raise DatasetError(f"no records found in {source}")

        export_csv(records, out)
        if args.json:
            export_json(records, os.path.splitext(out)[0] + ".json")
        self._display_header("EXTRACT")
        print(f"✅ {len(records)} records → {out}")
        if failures:
            print(f"⚠️  {len(failures)} bundle(s) failed:")
            for directory, message in failures:
                print(f"   • {os.path.basename(directory)}: {message}")

    def _cmd_stats(self, args):
        dataset = self._path(args.dataset, self.config.paths.dataset, "dataset")
        out = args.out or os.path.dirname(os.path.abspath(dataset))
        records, _ = self.engine.load_records(dataset)
        stats = self.engine.compute_stats(records)

        os.makedirs(out, exist_ok=True)
        paths = {key: os.path.join(out, name) for key, name in STATS_FILES.items()}
        stats.summary.table.to_csv(paths["variance"], na_rep="", lineterminator="\n")
        stats.correlation.to_csv(paths["correlation"], na_rep="", lineterminator="\n")
        stats.coverage.to_csv(paths["coverage"], index=False, na_rep="", lineterminator="\n")

        self._display_header(f"STATS ({stats.summary.variance} variance)")
        print("Mean variance per property:")
        for prop, value in stats.summary.prop_mean.items():
            print(f"   {prop:<14} {value:.5f}")
        if stats.summary.excluded_instances:
            print(f"⚠️  {len(stats.summary.excluded_instances)} single-repetition instance(s) excluded")
        for path in paths.values():
            print(f"✅ {path}")

    def _cmd_build_kb(self, args):
        dataset = self._path(args.dataset, self.config.paths.dataset, "dataset")
        out = self._path(args.out, self.config.paths.kb, "kb")
        records, _ = self.engine.load_records(dataset)
        kb = self.engine.build_kb(records)
        kb.save(out)

        self._display_header("BUILD KB")
        for prop in kb.properties():
            print(f"   {prop:<12} η={kb.cluster_models[prop].eta}")
        print(f"✅ {len(kb.classes())} classes, {len(kb.holds)} holds, {len(kb.concepts)} concepts → {out}")

    def _cmd_pyramid(self, args):
        dataset = self._path(args.dataset, self.config.paths.dataset, "dataset")
        out = self._path(args.out, None, "out")
        records, _ = self.engine.load_records(dataset)
        k_range = None
        if args.k_max is not None or args.k_min != 2:
            k_max = args.k_max if args.k_max is not None else len(records.classes())
            k_range = range(args.k_min, k_max + 1)
        levels = self.engine.pyramid(records, args.feature, k_range)

        directory = os.path.dirname(out)
        if directory:
            os.makedirs(directory, exist_ok=True)
        pyramid_frame(levels).to_csv(out, index=False, lineterminator="\n")
        self._display_header(f"PYRAMID ({args.feature})")
        for level in levels:
            sizes = ", ".join(str(sum(h.values())) for h in level.clusters)
            print(f"   k={level.k:<3} cluster sizes: {sizes}")
        print(f"✅ {out}")

    def _cmd_queries(self, args):
        kb_path = self._path(args.kb, self.config.paths.kb, "kb")
        out = self._path(args.out, self.config.paths.query, "query")
        queries = self.engine.generate_queries(KnowledgeBase.load(kb_path))
        save_queries(queries, out)
        self._display_header("QUERIES")
        print(f"✅ {len(queries)} queries → {out}")

    def _cmd_query(self, args):
        kb_path = self._path(args.kb, self.config.paths.kb, "kb")
        query_path = self._path(args.query, self.config.paths.query, "query")
        kb = KnowledgeBase.load(kb_path)
        queries = load_queries(query_path)
        results = self.engine.query(kb, queries, missing_ok=args.skip_unknown)

        text = render_results(results)
        if args.out:
            directory = os.path.dirname(args.out)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(args.out, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
        if args.heatmap:
            with open(args.heatmap, "w", encoding="utf-8", newline="") as f:
                f.write(render_heatmap(heatmap_table(kb, results)))

        self._display_header("QUERY")
        for result in results:
            self._display_result(result)
        if len(results) < len(queries):
            print(f"⚠️  {len(queries) - len(results)} query(ies) skipped: unknown class")
        if args.out:
            print(f"✅ {args.out}")

    # =========================================================================
    # Display
    # =========================================================================

    def _display_header(self, title: str):
        print(f"\n{'='*80}")
        print(f"CONCEPT ENGINE - {title}")
        print(f"{'='*80}\n")

    def _display_result(self, result):
        print(f"Missing: {result.missing_class} ({result.metric}, threshold {result.threshold})")
        for candidate, score in result.ranking:
            marker = "✅" if candidate in result.selected else "  "
            print(f"   {marker} {candidate:<14} {score:.4f}")
        print()


def main():
    sys.exit(ConceptCLI().run(sys.argv[1:]))


if __name__ == "__main__":
    main()
