"""Sub-categorization, attribution, conceptualization and substitution."""
