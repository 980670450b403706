"""Delocalization experiments for non-Hermitian random matrices."""
