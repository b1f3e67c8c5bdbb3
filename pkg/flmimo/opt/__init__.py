"""Convex surrogates, the barrier solver and the SCA loop."""
