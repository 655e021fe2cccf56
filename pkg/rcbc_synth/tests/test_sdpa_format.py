import numpy as np
import pytest

from src.errors import ParseError
from src.sdp_problem import SdpBuilder
from src.sdp_solver import SdpSolver
from src.sdpa_format import FREE_SPLIT_TAG, export_sdpa, import_sdpa


def _problem():
    builder = SdpBuilder()
    builder.add_block('X', 2)
    builder.add_block('Y', 1)
    builder.add_free('t', ['t'])
    builder.add_equality([(0, 0, 0, 1.0), (1, 0, 0, 1.0)], [(0, -1.0)], 0.1)
    builder.add_equality([(0, 0, 1, 0.3)], [], 1.0 / 3.0)
    builder.add_equality([(0, 1, 1, 1.0)], [(0, -1.0)], -2.0)
    builder.add_objective([(1, 0, 0, 1.0)], [(0, 1.0)])
    return builder.build()


def test_sdpa_roundtrip_bit_exact(tmp_path):
    """測試匯出後再匯入，所有資料逐位元相同"""
    problem = _problem()
    first = str(tmp_path / 'a.dat-s')
    export_sdpa(problem, first)
    loaded = import_sdpa(first)
    assert loaded.block_sizes == problem.block_sizes
    assert loaded.block_names == problem.block_names
    assert loaded.free_names == problem.free_names
    for name in ('con_index', 'con_block', 'con_row', 'con_col', 'con_value', 'rhs',
                 'obj_block', 'obj_row', 'obj_col', 'obj_value', 'free_cost'):
        np.testing.assert_array_equal(getattr(loaded, name), getattr(problem, name))
    np.testing.assert_array_equal(loaded.free_matrix.toarray(), problem.free_matrix.toarray())

    second = str(tmp_path / 'b.dat-s')
    export_sdpa(loaded, second)
    with open(first, encoding='utf-8') as f1, open(second, encoding='utf-8') as f2:
        assert f1.read() == f2.read()


def test_sdpa_free_split_block(tmp_path):
    """測試自由變數寫成最後一個 LP 區塊"""
    path = str(tmp_path / 'p.dat-s')
    export_sdpa(_problem(), path)
    with open(path, encoding='utf-8') as f:
        text = f.read()
    assert f"{FREE_SPLIT_TAG} 3" in text
    assert '2 1 -2' in text.splitlines()[5]


def test_sdpa_imported_problem_solves_identically(tmp_path):
    """測試匯入的問題與原問題求得相同目標值"""
    problem = _problem()
    path = str(tmp_path / 'p.dat-s')
    export_sdpa(problem, path)
    original = SdpSolver().solve(problem)
    loaded = SdpSolver().solve(import_sdpa(path))
    assert loaded.status == original.status
    assert loaded.primal_objective == pytest.approx(original.primal_objective, abs=1e-9)


def test_sdpa_plain_file_without_metadata(tmp_path):
    """測試讀入沒有中繼資料、含大括號與註解的一般 SDPA 檔案"""
    path = tmp_path / 'plain.dat-s'
    path.write_text('"max eigenvalue style problem"\n'
                    '* comment line\n'
                    '1 = mDIM\n'
                    '1 = nBLOCK\n'
                    '{2}\n'
                    '{1.0}\n'
                    '0 1 1 1 -1\n'
                    '0 1 2 2 -2\n'
                    '1 1 1 1 1\n'
                    '1 1 2 2 1\n', encoding='utf-8')
    problem = import_sdpa(str(path))
    assert problem.block_sizes == [2]
    assert problem.block_names == ['block0']
    assert problem.num_free == 0
    np.testing.assert_array_equal(problem.rhs, [1.0])
    np.testing.assert_array_equal(problem.obj_value, [1.0, 2.0])


@pytest.mark.parametrize('lines, bad_line', [
    (['1 = mDIM', '1 = nBLOCK', '2', '1.0', '1 1 1 1'], 5),
    (['1 = mDIM', '1 = nBLOCK', '2', '1.0', '0 1 1 1 -1', '1 1 3 3 1'], 6),
    (['1 = mDIM', 'x = nBLOCK'], 2),
    (['1 = mDIM', '1 = nBLOCK', '2', '1.0', '2 1 1 1 1'], 5),
    (['1 = mDIM', '1 = nBLOCK', '2', '1.0', '1 1 1 1 abc'], 5),
])
def test_sdpa_parse_error_line_numbers(tmp_path, lines, bad_line):
    """測試格式錯誤時回報正確行號"""
    path = tmp_path / 'bad.dat-s'
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    with pytest.raises(ParseError) as excinfo:
        import_sdpa(str(path))
    assert excinfo.value.line_number == bad_line


def test_sdpa_empty_file(tmp_path):
    """測試空檔案"""
    path = tmp_path / 'empty.dat-s'
    path.write_text('"only a title"\n', encoding='utf-8')
    with pytest.raises(ParseError):
        import_sdpa(str(path))
