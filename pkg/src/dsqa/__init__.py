"""dsqa: dietary-supplement question answering toolkit.

Pipeline: question-type classification, CRF entity tagging, knowledge-store
queries over iDISK-style files, and slot-filled answer generation, plus a
training/evaluation harness and an HTTP chat service.
"""

__version__ = "0.1.0"
