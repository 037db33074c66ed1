"""Random dataset builders shared across test modules."""

import numpy as np

from biasscan import Dataset, FeatureSpace, Subgroup


def make_space(arities):
    return FeatureSpace.from_dict({f"f{j}": [f"c{i}" for i in range(a)] for j, a in enumerate(arities)})


def random_dataset(rng, arities, n, p_low=0.05, p_high=0.95, planted=None, shift=0.0):
    """Codes uniform per feature, predictions uniform, outcomes drawn from them.

    ``planted`` is a list of allowed code sets per feature; rows inside get
    their outcome probability pushed up by ``shift`` on the log-odds scale.
    """
    codes = np.column_stack([rng.integers(0, a, n) for a in arities])
    p = rng.uniform(p_low, p_high, n)
    true = p.copy()
    if planted is not None:
        inside = np.ones(n, dtype=bool)
        for j, allowed in enumerate(planted):
            inside &= np.isin(codes[:, j], allowed)
        logit = np.log(p / (1 - p)) + shift * inside
        true = 1 / (1 + np.exp(-logit))
    y = (rng.random(n) < true).astype(int)
    return Dataset(make_space(arities), codes, y, p)


def random_fixed(rng, arities, j):
    """Random code sets for every feature but j, about half left unconstrained."""
    fixed = []
    for f, a in enumerate(arities):
        if f == j or rng.random() < 0.5:
            fixed.append(tuple(range(a)))
        else:
            k = int(rng.integers(1, a + 1))
            fixed.append(tuple(sorted(rng.choice(a, k, replace=False).tolist())))
    return fixed


def to_subgroup(ds, selection):
    return Subgroup.build(ds.space, {f.name: [f.values[c] for c in sel] for f, sel in zip(ds.space.features, selection)})
