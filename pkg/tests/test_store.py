"""Tests for the result file helpers."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from rdprofile import store
from rdprofile.errors import UnreadableInputError


def test_write_json_converts_numpy(tmp_path):
    """Arrays, numpy scalars and paths become plain JSON values."""
    path = store.write_json(tmp_path / 'sub' / 'a.json', {
        'b': np.array([1.5, 2.0]),
        'a': np.int64(3),
        'c': (np.float64(0.25), Path('x/y')),
    })
    text = path.read_text(encoding='utf-8')
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert json.loads(text) == {'a': 3, 'b': [1.5, 2.0], 'c': [0.25, 'x/y']}


def test_write_json_is_repeatable(tmp_path):
    """The same data always gives the same bytes."""
    data = {'z': 0.1, 'a': [1, 2, 3]}
    a = store.write_json(tmp_path / 'a.json', data).read_bytes()
    b = store.write_json(tmp_path / 'b.json', dict(reversed(data.items())))
    assert a == b.read_bytes()


@pytest.mark.parametrize('text', [None, '{not json'])
def test_read_json_errors(tmp_path, text):
    """Missing and invalid files are unreadable input."""
    path = tmp_path / 'bad.json'
    if text is not None:
        path.write_text(text, encoding='utf-8')
    with pytest.raises(UnreadableInputError):
        store.read_json(path)


def test_table_round_trip(tmp_path):
    """Tables are written without an index."""
    table = pd.DataFrame({'x': [1, 2], 'y': ['a', 'b']})
    path = store.write_table(tmp_path / 't.csv', table)
    assert path.read_text(encoding='utf-8') == 'x,y\n1,a\n2,b\n'
    pd.testing.assert_frame_equal(store.read_table(path), table)


def test_read_table_errors(tmp_path):
    """Missing and empty tables are unreadable input."""
    with pytest.raises(UnreadableInputError):
        store.read_table(tmp_path / 'missing.csv')
    empty = tmp_path / 'empty.csv'
    empty.write_text('', encoding='utf-8')
    with pytest.raises(UnreadableInputError):
        store.read_table(empty)


def test_sidecar_path():
    """The sidecar sits next to its table."""
    assert store.sidecar_path(Path('out/rd.csv')) == Path('out/rd.json')
