"""Theorem prover and proof checker for Boolean BI."""
