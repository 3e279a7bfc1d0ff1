"""Iterative hidden-Markov-model decoding of short regular LDPC codes."""
