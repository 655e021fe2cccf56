"""
SDPA 稀疏格式 (.dat-s) 讀寫

內部標準形式  min ⟨C,X⟩ + dᵀz  s.t. ⟨A_k,X⟩ + F_k z = b_k
對應到 SDPA 的對偶形式  max ⟨F_0,Y⟩  s.t. ⟨F_k,Y⟩ = c_k, Y ⪰ 0，
其中 c = b、F_0 = −C、F_k = A_k。自由變數拆成 z = z⁺ − z⁻，
放在最後一個 LP 區塊（區塊大小寫成負數），並以 "*free-split" 註解行標記。
"""
import json
import logging
from typing import Dict, List, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import ParseError
from .sdp_problem import SdpProblem

logger = logging.getLogger('SdpaFormat')

FREE_SPLIT_TAG = '*free-split'
META_TAG = '*rcbc-meta'


def _fmt(value: float) -> str:
    return '%.17g' % value


def export_sdpa(problem: SdpProblem, path: str):
    """寫出 SDPA 稀疏格式檔案

    Args:
        problem: 標準形式 SDP
        path: 輸出路徑（慣例副檔名 .dat-s）
    """
    nf = problem.num_free
    sizes = list(problem.block_sizes)
    split_block = None
    if nf:
        sizes.append(-2 * nf)
        split_block = len(sizes)
    lines = [f'"rcbc_synth SDP: {problem.num_constraints} constraints, {problem.num_blocks} blocks, {nf} free"']
    meta = {
        'block_names': problem.block_names,
        'free_names': problem.free_names,
        'symbols': {k: list(v) for k, v in problem.symbols.items()},
    }
    lines.append(f"{META_TAG} {json.dumps(meta, separators=(',', ':'))}")
    if split_block is not None:
        lines.append(f"{FREE_SPLIT_TAG} {split_block}")
    lines.append(f"{problem.num_constraints} = mDIM")
    lines.append(f"{len(sizes)} = nBLOCK")
    lines.append(' '.join(str(s) for s in sizes))
    lines.append(' '.join(_fmt(b) for b in problem.rhs))

    # F_0 = −C
    for blk, i, j, v in zip(problem.obj_block, problem.obj_row, problem.obj_col, problem.obj_value):
        lines.append(f"0 {blk + 1} {i + 1} {j + 1} {_fmt(-v)}")
    if split_block is not None:
        for idx in np.nonzero(problem.free_cost)[0]:
            d = problem.free_cost[idx]
            lines.append(f"0 {split_block} {idx + 1} {idx + 1} {_fmt(-d)}")
            lines.append(f"0 {split_block} {nf + idx + 1} {nf + idx + 1} {_fmt(d)}")

    free = problem.free_matrix.tocsr() if nf else None
    order = np.argsort(problem.con_index, kind='stable')
    starts = np.searchsorted(problem.con_index[order], np.arange(problem.num_constraints + 1))
    for k in range(problem.num_constraints):
        for t in order[starts[k]:starts[k + 1]]:
            lines.append(f"{k + 1} {problem.con_block[t] + 1} {problem.con_row[t] + 1} "
                         f"{problem.con_col[t] + 1} {_fmt(problem.con_value[t])}")
        if free is not None:
            row = free.getrow(k)
            for idx, v in zip(row.indices, row.data):
                lines.append(f"{k + 1} {split_block} {idx + 1} {idx + 1} {_fmt(v)}")
                lines.append(f"{k + 1} {split_block} {nf + idx + 1} {nf + idx + 1} {_fmt(-v)}")

    with open(path, 'w', encoding='utf-8') as f:
        f.write('\n'.join(lines) + '\n')
    logger.info(f"已匯出 SDPA 檔案: {path}")


def _tokens(lines: List[str]):
    """逐一產生 (行號, token)，跳過註解與大括號、逗號"""
    for number, line in lines:
        for token in line.replace('{', ' ').replace('}', ' ').replace(',', ' ').replace('(', ' ').replace(
                ')', ' ').split():
            yield number, token


def import_sdpa(path: str) -> SdpProblem:
    """讀入 SDPA 稀疏格式檔案

    Raises:
        ParseError: 檔案格式錯誤，附帶行號
    """
    with open(path, 'r', encoding='utf-8') as f:
        raw = f.read().splitlines()

    split_block = None
    meta: Dict = {}
    content: List[Tuple[int, str]] = []
    for number, line in enumerate(raw, start=1):
        stripped = line.strip()
        if stripped.startswith(FREE_SPLIT_TAG):
            try:
                split_block = int(stripped[len(FREE_SPLIT_TAG):].strip())
            except ValueError:
                raise ParseError(f"無法解析 free-split 標記: {stripped}", number)
            continue
        if stripped.startswith(META_TAG):
            try:
                meta = json.loads(stripped[len(META_TAG):].strip())
            except json.JSONDecodeError:
                raise ParseError("無法解析中繼資料", number)
            continue
        if not stripped or stripped[0] in '"*':
            continue
        content.append((number, stripped))

    if not content:
        raise ParseError("檔案沒有內容", len(raw))

    # 標頭：mDIM 與 nBLOCK 各佔一行，行內其餘文字為說明
    m = _leading_int(content[0], 'mDIM')
    if len(content) < 2:
        raise ParseError("缺少 nBLOCK", content[0][0])
    nblock = _leading_int(content[1], 'nBLOCK')
    header = _tokens(content[2:])
    consumed_line = content[1][0]

    def next_number(what: str, cast):
        nonlocal consumed_line
        try:
            number, token = next(header)
        except StopIteration:
            raise ParseError(f"缺少 {what}", len(raw))
        try:
            value = cast(token)
        except ValueError:
            raise ParseError(f"{what} 格式錯誤: {token}", number)
        consumed_line = number
        return value

    sizes = [next_number('區塊大小', int) for _ in range(nblock)]
    rhs = np.array([next_number('目標向量元素', float) for _ in range(m)], dtype=float)

    if split_block is not None and not (1 <= split_block <= nblock and sizes[split_block - 1] < 0
                                        and sizes[split_block - 1] % 2 == 0):
        raise ParseError(f"free-split 區塊 {split_block} 不是偶數大小的 LP 區塊", content[1][0])
    nf = -sizes[split_block - 1] // 2 if split_block is not None else 0
    psd_sizes = [s for b, s in enumerate(sizes, start=1) if b != split_block]
    if any(s <= 0 for s in psd_sizes):
        raise ParseError("只支援半正定區塊與自由變數拆分區塊", content[1][0])
    block_map = {}
    for b in range(1, nblock + 1):
        if b != split_block:
            block_map[b] = len(block_map)

    con = ([], [], [], [], [])
    obj = ([], [], [], [])
    free_rows, free_cols, free_vals = [], [], []
    free_cost = np.zeros(nf)
    for number, line in content:
        if number <= consumed_line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ParseError(f"每筆資料應有 5 個欄位: {line}", number)
        try:
            matno, blk, i, j = (int(p) for p in parts[:4])
            value = float(parts[4])
        except ValueError:
            raise ParseError(f"無法解析資料列: {line}", number)
        if not 0 <= matno <= m:
            raise ParseError(f"矩陣編號超出範圍: {matno}", number)
        if not 1 <= blk <= nblock:
            raise ParseError(f"區塊編號超出範圍: {blk}", number)
        size = abs(sizes[blk - 1])
        if not (1 <= i <= size and 1 <= j <= size):
            raise ParseError(f"索引超出區塊大小 {size}: ({i}, {j})", number)
        if i > j:
            i, j = j, i
        if blk == split_block:
            if i != j:
                raise ParseError("LP 區塊只能有對角元素", number)
            if i > nf:
                continue  # z⁻ 部分與 z⁺ 互為相反數
            if matno == 0:
                free_cost[i - 1] = -value
            else:
                free_rows.append(matno - 1)
                free_cols.append(i - 1)
                free_vals.append(value)
            continue
        if matno == 0:
            obj[0].append(block_map[blk])
            obj[1].append(i - 1)
            obj[2].append(j - 1)
            obj[3].append(-value)
        else:
            con[0].append(matno - 1)
            con[1].append(block_map[blk])
            con[2].append(i - 1)
            con[3].append(j - 1)
            con[4].append(value)

    names = meta.get('block_names') or [f'block{b}' for b in range(len(psd_sizes))]
    free_names = meta.get('free_names') or [f'z[{i}]' for i in range(nf)]
    symbols = {k: tuple(v) for k, v in meta.get('symbols', {}).items()}
    problem = SdpProblem(
        block_sizes=psd_sizes,
        block_names=list(names),
        con_index=np.array(con[0], dtype=np.int64),
        con_block=np.array(con[1], dtype=np.int64),
        con_row=np.array(con[2], dtype=np.int64),
        con_col=np.array(con[3], dtype=np.int64),
        con_value=np.array(con[4], dtype=float),
        free_matrix=sp.csr_matrix((free_vals, (free_rows, free_cols)), shape=(m, nf)),
        rhs=rhs,
        obj_block=np.array(obj[0], dtype=np.int64),
        obj_row=np.array(obj[1], dtype=np.int64),
        obj_col=np.array(obj[2], dtype=np.int64),
        obj_value=np.array(obj[3], dtype=float),
        free_cost=free_cost,
        free_names=list(free_names),
        symbols=symbols,
    )
    logger.info(f"已讀入 SDPA 檔案: {path} ({m} 條約束, {len(psd_sizes)} 個區塊, {nf} 個自由變數)")
    return problem


def _leading_int(entry: Tuple[int, str], what: str) -> int:
    number, line = entry
    token = line.replace('{', ' ').replace('}', ' ').replace(',', ' ').split()[0]
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"{what} 應為整數: {token}", number)
