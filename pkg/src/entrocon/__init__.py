"""Entropy contraction constants of finite reversible Markov chains."""
