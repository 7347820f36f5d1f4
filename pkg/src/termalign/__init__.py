"""Terminology KB enrichment via semantic + graph structure embeddings."""

__version__ = "0.1.0"

from .kb import CandidateSet, KnowledgeBase, PairSet, load_kb, save_kb  # noqa: F401
