"""
命令列介面：gen-data | synth | verify | simulate | export-sdpa | run
"""
import argparse
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .certificate import Certificate, assemble_certificate, level_gap_prefilter
from .closed_loop import export_runs, run_closed_loop, run_open_loop, summarize_runs
from .errors import (EXIT_OK, EXIT_UNEXPECTED, EXIT_VALIDATION, EXIT_VIOLATION, LevelGapFailure, NotPositiveDefinite,
                     NumericalFailure, RcbcError, SynthesisFailed)
from .plant import TrajectoryCollector, TrajectoryData, check_rank
from .run_config import RunConfig
from .sdp_solver import SdpSolver
from .sdpa_format import export_sdpa
from .sos_compiler import build_sos_problem, default_transform
from .svg_render import render_projections
from .utils.logger import configure_logging
from .utils.settings import load_settings
from .verification import PointwiseVerifier

DATA_DIR = 'data'
CERTIFICATE_FILE = 'certificate.json'
MANIFEST_FILE = 'manifest.json'
SIMULATION_DIR = 'simulation'


@dataclass
class GridAttempt:
    lam: float
    pi: float
    status: str
    reason: str = ''
    solver: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {'lambda': self.lam, 'pi': self.pi, 'status': self.status, 'reason': self.reason,
                'solver': self.solver}


def _solve_grid_point(data: TrajectoryData, config: RunConfig, settings: dict, lam: float, pi: float):
    """求解單一 (λ, π) 網格點；回傳 (GridAttempt, Certificate 或 None)

    數值上的失敗回報為 GridAttempt，設定錯誤則直接拋出。
    """
    logger = logging.getLogger('GridPoint')
    synthesis = settings.get('synthesis', {})
    solver = SdpSolver.from_settings(settings)
    try:
        program, problem = build_sos_problem(
            data, default_transform(data.r_dictionary), data.g_dictionary, config.state, lam, pi,
            deg_H=config.degrees.get('deg_H'), deg_alpha=config.degrees.get('deg_alpha') or 0,
            deg_varpi=config.degrees.get('deg_varpi'), gram_degree=config.degrees.get('gram_degree'),
            eps_pd=synthesis.get('eps_pd', 1e-3), alpha_min=synthesis.get('alpha_min', 1e-9),
            objective=synthesis.get('objective', 'trace'))
        solution = solver.solve(problem)
        if not solution.is_success:
            return GridAttempt(lam, pi, 'failed', f"求解器狀態 {solution.status}", solution.summary()), None
        cert = assemble_certificate(solution, program, config.state, config.initial, config.unsafe,
                                    level_set_solver=solver if config.sos_level_sets else None)
        cert.provenance['program'] = program.summary()
        return GridAttempt(lam, pi, 'success', '', solution.summary()), cert
    except NumericalFailure as e:
        summary = e.solution.summary() if e.solution is not None else {}
        logger.warning(f"(λ={lam}, π={pi}) 數值失敗: {e}")
        return GridAttempt(lam, pi, 'failed', f"數值失敗: {e}", summary), None
    except (NotPositiveDefinite, LevelGapFailure) as e:
        logger.warning(f"(λ={lam}, π={pi}) 證書檢查失敗: {e}")
        return GridAttempt(lam, pi, 'failed', str(e)), None


class SynthesisPipeline:
    """依序執行資料收集、合成、驗證與模擬"""

    def __init__(self, config: RunConfig, settings: dict):
        self.config = config
        self.settings = self._merge_solver(settings, config)
        self.output_dir = config.output_dir
        self.logger = logging.getLogger('SynthesisPipeline')

    @staticmethod
    def _merge_solver(settings: dict, config: RunConfig) -> dict:
        merged = dict(settings)
        merged['solver'] = {**settings.get('solver', {}), **config.solver}
        return merged

    def _path(self, *parts: str) -> str:
        return os.path.join(self.output_dir, *parts)

    def write_manifest(self, command: str, extra: Optional[dict] = None):
        """manifest.json 記錄可重現本次輸出的設定；多個子命令依序合併"""
        os.makedirs(self.output_dir, exist_ok=True)
        path = self._path(MANIFEST_FILE)
        manifest = {}
        if os.path.exists(path):
            with open(path, 'r', encoding='utf-8') as f:
                manifest = json.load(f)
        manifest.update({
            'package_version': __version__,
            'config': self.config.to_json(),
            'settings': {key: self.settings.get(key) for key in ('solver', 'synthesis', 'verification')},
        })
        manifest.setdefault('commands', {})[command] = extra or {}
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(manifest, f, indent=2)

    # ---- 子命令 ----
    def gen_data(self) -> TrajectoryData:
        config = self.config
        collector = TrajectoryCollector(config.system(), config.r_dictionary, config.g_dictionary)
        data = collector.collect_with_retries(config.initial_state(), config.excitation_spec(), config.disturbance,
                                              config.T, config.seeds['data'])
        directory = self._path(DATA_DIR)
        data.save(directory, test_artifacts=config.test_artifacts)
        report = check_rank(data.R0T)
        rank = {
            'full_row_rank': report.full_row_rank,
            'ratio': report.ratio,
            'singular_values': report.singular_values.tolist(),
            'attempts': data.attempts,
            'seed': data.seed,
        }
        with open(os.path.join(directory, 'rank_report.json'), 'w', encoding='utf-8') as f:
            json.dump(rank, f, indent=2)
        self.write_manifest('gen-data', {'data_dir': directory, 'seed': data.seed, 'attempts': data.attempts})
        return data

    def load_data(self, data_dir: Optional[str] = None) -> TrajectoryData:
        return TrajectoryData.load(data_dir or self._path(DATA_DIR))

    def grid(self) -> List[tuple]:
        return [(lam, pi) for lam in self.config.lambda_grid for pi in self.config.pi_grid]

    def synthesize(self, data: TrajectoryData) -> Certificate:
        """走訪 λ/π 網格，取第一個成功的網格點

        Raises:
            SynthesisFailed: 所有網格點都失敗，attempts 列出各點原因
        """
        config = self.config
        attempts: List[GridAttempt] = []
        candidates = []
        for lam, pi in self.grid():
            ok, reason = level_gap_prefilter(lam, pi, data.delta, config.unsafe)
            if ok:
                candidates.append((lam, pi))
            else:
                self.logger.info(f"略過 (λ={lam}, π={pi}): {reason}")
                attempts.append(GridAttempt(lam, pi, 'skipped', reason))

        cert = None
        workers = max(1, config.workers, int(self.settings.get('synthesis', {}).get('workers', 1)))
        if workers > 1 and len(candidates) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_solve_grid_point, data, config, self.settings, lam, pi)
                           for lam, pi in candidates]
                # 依網格順序取結果，較早的成功點優先
                for index, future in enumerate(futures):
                    attempt, result = future.result()
                    attempts.append(attempt)
                    if result is not None:
                        cert = result
                        for pending in futures[index + 1:]:
                            pending.cancel()
                        break
        else:
            for lam, pi in candidates:
                attempt, result = _solve_grid_point(data, config, self.settings, lam, pi)
                attempts.append(attempt)
                if result is not None:
                    cert = result
                    break

        log = [a.to_json() for a in attempts]
        os.makedirs(self.output_dir, exist_ok=True)
        with open(self._path('synthesis_log.json'), 'w', encoding='utf-8') as f:
            json.dump(log, f, indent=2)
        if cert is None:
            raise SynthesisFailed(f"λ/π 網格的 {len(attempts)} 個點都失敗", log)

        cert.provenance['grid_point'] = {'lambda': cert.lam, 'pi': cert.pi}
        cert.provenance['attempts'] = log
        cert.provenance['data'] = {'T': data.T, 'seed': data.seed, 'delta': data.delta}
        cert.save(self._path(CERTIFICATE_FILE))
        self.write_manifest('synth', {'grid_point': cert.provenance['grid_point'], 'attempts': len(attempts)})
        self.logger.info(f"合成成功: λ={cert.lam}, π={cert.pi}, γ1={cert.gamma1:.6e}, γ2={cert.gamma2:.6e}")
        return cert

    def verify(self, cert: Certificate) -> int:
        verifier = PointwiseVerifier.from_settings(self.settings, seed=self.config.seeds['verify'])
        report = verifier.verify(cert, self.config.system())
        report.save(self.output_dir)
        print(report.to_text())
        self.write_manifest('verify', {'passed': report.passed, 'violations': report.total_violations})
        return EXIT_OK if report.passed else EXIT_VIOLATION

    def simulate(self, cert: Certificate) -> int:
        config = self.config
        sim = config.simulation
        workers = max(1, int(self.settings.get('simulation', {}).get('workers', 1)), config.workers)
        plant_system = config.system()
        directory = self._path(SIMULATION_DIR)
        runs = run_closed_loop(plant_system, cert, x0_mode=sim['x0_mode'], w_mode=sim['w_mode'], K=int(sim['K']),
                               num_runs=int(sim['num_runs']), seed=config.seeds['simulate'], x0=sim.get('x0'),
                               workers=workers)
        export_runs(runs, os.path.join(directory, 'closed_loop.csv'))
        render_projections(runs, cert, directory, prefix='closed_loop')

        baseline = run_open_loop(plant_system, config.initial, config.unsafe, config.delta, cert=cert,
                                 K=int(sim['K']), num_runs=2 ** config.n, seed=config.seeds['simulate'],
                                 workers=workers)
        export_runs(baseline, os.path.join(directory, 'open_loop.csv'))
        render_projections(baseline, cert, directory, prefix='open_loop')

        summary = summarize_runs(runs, cert)
        with open(os.path.join(directory, 'summary.json'), 'w', encoding='utf-8') as f:
            json.dump(summary.to_json(), f, indent=2)
        self.write_manifest('simulate', summary.to_json())
        if not summary.all_safe:
            self.logger.error(f"閉迴路軌跡進入不安全集: {summary.unsafe_runs}")
            return EXIT_VIOLATION
        return EXIT_OK

    def export_program(self, data: TrajectoryData, lam: Optional[float] = None, pi: Optional[float] = None) -> str:
        """把單一網格點的程式匯出成 SDPA 檔案（預設為第一個通過預篩的網格點）"""
        if lam is None or pi is None:
            passing = [(l, p) for l, p in self.grid() if level_gap_prefilter(l, p, data.delta, self.config.unsafe)[0]]
            lam, pi = (passing or self.grid())[0]
        synthesis = self.settings.get('synthesis', {})
        degrees = self.config.degrees
        program, problem = build_sos_problem(
            data, default_transform(data.r_dictionary), data.g_dictionary, self.config.state, lam, pi,
            deg_H=degrees.get('deg_H'), deg_alpha=degrees.get('deg_alpha') or 0, deg_varpi=degrees.get('deg_varpi'),
            gram_degree=degrees.get('gram_degree'), eps_pd=synthesis.get('eps_pd', 1e-3),
            alpha_min=synthesis.get('alpha_min', 1e-9), objective=synthesis.get('objective', 'trace'))
        path = self._path(f'program_l{lam:g}_p{pi:g}.dat-s')
        os.makedirs(self.output_dir, exist_ok=True)
        export_sdpa(problem, path)
        with open(self._path('program_summary.json'), 'w', encoding='utf-8') as f:
            json.dump(program.summary(), f, indent=2)
        self.write_manifest('export-sdpa', {'path': path, 'lambda': lam, 'pi': pi})
        return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='rcbc-synth', description='由單一軌跡資料合成強健障礙證書與控制器')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--settings', help='YAML 設定檔路徑（預設搜尋 config/config.yaml）')
    sub = parser.add_subparsers(dest='command', required=True)

    def common(p: argparse.ArgumentParser):
        p.add_argument('--config', required=True, help='JSON 執行設定（或先前輸出的 manifest.json）')
        p.add_argument('--output-dir', help='輸出目錄')
        p.add_argument('--T', type=int, help='樣本數')
        p.add_argument('--delta', type=float, help='擾動界 δ')
        p.add_argument('--seed', type=int, help='主亂數種子')
        p.add_argument('--workers', type=int, help='平行處理的行程數')
        p.add_argument('--test-artifacts', action='store_true', help='輸出隱藏的擾動序列 W（僅供測試）')
        p.add_argument('--sos-level-sets', action='store_true', help='以 SOS 條件求 γ1、γ2')
        return p

    common(sub.add_parser('gen-data', help='收集軌跡資料'))
    p = common(sub.add_parser('synth', help='由資料合成證書'))
    p.add_argument('--data', help='軌跡資料目錄（預設 <output-dir>/data）')
    p = common(sub.add_parser('verify', help='以真實系統逐點驗證證書'))
    p.add_argument('--certificate', help='證書 JSON（預設 <output-dir>/certificate.json）')
    p = common(sub.add_parser('simulate', help='閉迴路模擬並繪圖'))
    p.add_argument('--certificate', help='證書 JSON（預設 <output-dir>/certificate.json）')
    p = common(sub.add_parser('export-sdpa', help='匯出 SDPA 檔案'))
    p.add_argument('--data', help='軌跡資料目錄（預設 <output-dir>/data）')
    p.add_argument('--lam', type=float, help='λ')
    p.add_argument('--pi', type=float, help='π')
    common(sub.add_parser('run', help='gen-data → synth → verify → simulate'))
    return parser


def run_command(args: argparse.Namespace, settings: dict) -> int:
    config = RunConfig.load(args.config).apply_overrides(
        T=args.T, delta=args.delta, seed=args.seed, output_dir=args.output_dir, workers=args.workers,
        test_artifacts=args.test_artifacts, sos_level_sets=args.sos_level_sets)
    pipeline = SynthesisPipeline(config, settings)
    command = args.command

    def certificate() -> Certificate:
        return Certificate.load(getattr(args, 'certificate', None) or pipeline._path(CERTIFICATE_FILE))

    if command == 'gen-data':
        pipeline.gen_data()
        return EXIT_OK
    if command == 'synth':
        pipeline.synthesize(pipeline.load_data(args.data))
        return EXIT_OK
    if command == 'verify':
        return pipeline.verify(certificate())
    if command == 'simulate':
        return pipeline.simulate(certificate())
    if command == 'export-sdpa':
        pipeline.export_program(pipeline.load_data(args.data), args.lam, args.pi)
        return EXIT_OK
    # run
    data = pipeline.gen_data()
    cert = pipeline.synthesize(data)
    verified = pipeline.verify(cert)
    simulated = pipeline.simulate(cert)
    return verified if verified != EXIT_OK else simulated


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = load_settings(args.settings)
    configure_logging(settings)
    logger = logging.getLogger('rcbc_synth')
    try:
        return run_command(args, settings)
    except SynthesisFailed as e:
        logger.error(f"合成失敗: {e}")
        for attempt in e.attempts:
            logger.error(f"  λ={attempt['lambda']}, π={attempt['pi']}: {attempt['status']} {attempt['reason']}")
        return e.exit_code
    except RcbcError as e:
        if e.exit_code == EXIT_VALIDATION:
            logger.error(f"設定驗證失敗 ({type(e).__name__}): {e}")
        else:
            logger.error(f"{type(e).__name__}: {e}", exc_info=True)
        return e.exit_code
    except Exception as e:
        logger.error(f"未預期的錯誤: {e}", exc_info=True)
        return EXIT_UNEXPECTED


if __name__ == '__main__':
    raise SystemExit(main())
