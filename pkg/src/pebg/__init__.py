"""Question embeddings pre-trained on a question-skill bipartite graph, for knowledge tracing."""

__version__ = "0.1.0"
FORMAT_VERSIONS = {"dataset": 1, "embeddings": 1, "parameters": 1, "kt_model": 1}
