"""Character-level LSTM language modeling, N-best rescoring, and WER
evaluation toolkit."""

__version__ = "0.1.0"
