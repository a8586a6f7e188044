import numpy as np
import pytest

from ppsf_entanglement_lib.number_crunchers.errors import InvalidParameterError
from ppsf_entanglement_lib.number_crunchers.photon_counting import TimeTagStream
from ppsf_entanglement_lib.number_crunchers.timetag_parser import MAGIC, read_ttag, write_ttag


def test_write_then_read(tmp_path):
    path = str(tmp_path / "batch.ttag")
    streams = [TimeTagStream(1, [10, 2000, 2 ** 40]), TimeTagStream(2, [15, 1990])]
    assert write_ttag(path, streams) == path

    data = (tmp_path / "batch.ttag").read_bytes()
    assert data[:5] == MAGIC
    assert len(data) == 5 + 5 * 9

    loaded = read_ttag(path)
    assert sorted(loaded) == [1, 2]
    np.testing.assert_array_equal(loaded[1].ticks, [10, 2000, 2 ** 40])
    np.testing.assert_array_equal(loaded[2].ticks, [15, 1990])


def test_empty_stream_writes_only_the_header(tmp_path):
    path = str(tmp_path / "empty.ttag")
    write_ttag(path, [TimeTagStream(3, [])])
    assert (tmp_path / "empty.ttag").read_bytes() == MAGIC
    assert read_ttag(path) == {}


def test_bad_files_are_rejected(tmp_path):
    bad_header = tmp_path / "bad.ttag"
    bad_header.write_bytes(b"TTAG0" + bytes(9))
    with pytest.raises(InvalidParameterError, match="header"):
        read_ttag(str(bad_header))

    truncated = tmp_path / "short.ttag"
    truncated.write_bytes(MAGIC + bytes(13))
    with pytest.raises(InvalidParameterError, match="truncated"):
        read_ttag(str(truncated))


def test_unwritable_streams(tmp_path):
    with pytest.raises(InvalidParameterError):
        write_ttag(str(tmp_path / "neg.ttag"), [TimeTagStream(1, [-5, 3])])
    with pytest.raises(InvalidParameterError):
        write_ttag(str(tmp_path / "wide.ttag"), [TimeTagStream(300, [1])])
    assert not (tmp_path / "neg.ttag").exists()
