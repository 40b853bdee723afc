"""ChatCoder: two-round requirement refinement for LLM code generation,
with human review, provenance tracking and a pass@k evaluation harness."""

__version__ = "0.1.0"
