"""A priori TSP: evaluation, reductions to Hop-ATSP, hierarchical covers and oracles."""
