"""Kernel backend selection.

The compiled extension is used when it imported cleanly; set
GUESSGAME_BACKEND=python to force the numpy fallback, or =c to require the
extension (raising if it is missing). Both backends expose the same
functions; see pyref for the contract and the feature layout.
"""

import os

from . import pyref

_requested = os.environ.get("GUESSGAME_BACKEND", "auto").lower()

if _requested in ("auto", "c"):
    try:
        from .. import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "c":
            raise
        _impl = pyref
elif _requested in ("python", "py"):
    _impl = pyref
else:
    raise ValueError(f"GUESSGAME_BACKEND={_requested!r} not one of auto/c/python")

feature_dim = _impl.feature_dim
entropy = _impl.entropy
info_gains = _impl.info_gains
featurize = _impl.featurize
featurize_batch = _impl.featurize_batch
masked_softmax = _impl.masked_softmax
masked_softmax_batch = _impl.masked_softmax_batch
policy_probs = _impl.policy_probs
sample_index = _impl.sample_index
sample_index_batch = _impl.sample_index_batch
bayes_update = _impl.bayes_update


def backend_name() -> str:
    return _impl.NAME
