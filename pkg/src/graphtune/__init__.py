"""Graph-to-corpus compiler and evaluation harness.

Turns a text-attributed graph into a two-stage fine-tuning corpus
(context recitations and summaries for stage 1, QA pairs for stage 2) by
driving an OpenAI-compatible chat endpoint, and evaluates served models
on graph tasks with exact-match or judge scoring plus token accounting.
"""

__version__ = "0.1.0"
