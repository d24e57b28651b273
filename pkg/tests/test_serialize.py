import json
import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from vinedep.serialize import dumps, loads


def test_sorted_keys_and_float_format():
    text = dumps({"b": 1.0, "a": [0.1 + 0.2, 2, None, True], "c": {"z": 1e-20, "y": -0.0}},
                 indent=0)
    assert text == '{"a": [0.3, 2, null, true], "b": 1.0, "c": {"y": 0.0, "z": 1e-20}}\n'


def test_numpy_scalars_and_nonfinite():
    text = dumps({"x": np.float64(1 / 3), "n": np.int64(4), "inf": math.inf}, indent=0)
    assert loads(text) == {"inf": None, "n": 4, "x": 0.333333333333}


def test_unknown_type():
    try:
        dumps({"x": object()})
    except TypeError:
        return
    raise AssertionError("expected TypeError")


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-10**6, 10**6)
    | st.floats(allow_nan=False, allow_infinity=False) | st.text(max_size=8),
    lambda kids: st.lists(kids, max_size=4) | st.dictionaries(st.text(max_size=5), kids, max_size=4),
    max_leaves=20)


@settings(max_examples=200, deadline=None)
@given(json_values)
def test_canonical_roundtrip(obj):
    text = dumps(obj)
    assert dumps(loads(text)) == text
    assert json.loads(text) == loads(text)
