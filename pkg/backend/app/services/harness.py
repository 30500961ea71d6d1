"""Harness service: config-driven simulation experiments and result files."""

import json
import math
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from app import __version__
from app.config import Config
from app.models.calibration import BoundingSequence, BoundingSpec
from app.models.dependence import CorrelationMatrix, StructureSpec
from app.models.estimate import ZScores
from app.models.experiment import (
    CalibrationSettings,
    CellSummary,
    CoverageRow,
    ExperimentConfig,
    ExperimentResult,
    MacCRow,
    SignalSpec,
    VarianceRow,
)
from app.services.baselines import baselines_service
from app.services.calibration import calibration_service
from app.services.dependence import dependence_service
from app.services.estimators import estimator_service
from app.utils.errors import SpecSyntaxError
from app.utils.logger import logger
from app.utils.numerics import NS_REPLICATES, NS_SIGNALS, RngStream, sample_mvn
from app.utils.parallel import map_ordered

FLOAT_FORMAT = "%.17g"

REFERENCE_STRUCTURES = [
    "ar:p=2000,r=0.9",
    "equal:p=2000,rho=0.5",
    "block:p=2000,size=400,rho=0.5",
    "sparse:p=2000,prob=0.1,value=0.9,seed=1",
]
REFERENCE_MUS = [3.0, 4.0, 5.0, 6.0]
TABLE_TARGETS = ("1", "2", "3")
FIGURE_TARGETS = ("2", "3", "4", "5", "6", "7")
FAMILY_ESTIMATORS = ("half", "one", "adap")


class StructureContext(BaseModel):
    """A structure with its MAC and the bounding sequences shared by all its replicates."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    text: str
    sigma: CorrelationMatrix
    mac: float
    sequences: Dict[str, BoundingSequence] = {}


def _with_dimension(text: str, p: Optional[int]) -> str:
    spec = StructureSpec.parse(text)
    if p is None or spec.kind == "file":
        return spec.canonical()
    params = dict(spec.params, p=p)
    return StructureSpec(kind=spec.kind, params=params).canonical()


def _mean_sd(values: np.ndarray):
    mean = float(np.mean(values))
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return mean, sd


class HarnessService:
    """Service for running simulation experiments."""

    def prepare_structure(
        self,
        text: str,
        calibration: CalibrationSettings,
        seed: int,
        estimators: Sequence[str] = ("half", "one", "adap"),
        threads: Optional[int] = None,
    ) -> StructureContext:
        """
        Build a structure and calibrate its bounding sequences once.

        half / one / adap use the grid of `calibration.grid`; half_star / one_star
        always use the integer grid. A sequence needed by both is calibrated once.
        """
        sigma = dependence_service.build_from_text(text)
        mac = dependence_service.mac(sigma).value
        context = StructureContext(text=text, sigma=sigma, mac=mac)

        grids = []
        if any(name in estimators for name in FAMILY_ESTIMATORS):
            grids.append((calibration.grid, ""))
        if any(name in estimators for name in ("half_star", "one_star")):
            grids.append(("integer", "_star"))
        if not grids:
            return context

        reps = calibration_service.simulate_null_replicates_parametric(sigma, calibration.R, seed, threads)
        calibrated: Dict[tuple, BoundingSequence] = {}
        for grid, suffix in grids:
            for name, theta in (("half", 0.5), ("one", 1.0)):
                if (grid, theta) not in calibrated:
                    spec = BoundingSpec(theta=theta, alpha=calibration.alpha, grid=grid)
                    calibrated[(grid, theta)] = calibration_service.bounding_sequence(reps, spec, threads)
                context.sequences[name + suffix] = calibrated[(grid, theta)]
        return context

    def simulate_z(self, sigma: CorrelationMatrix, signal: SignalSpec, seed: int, stream_id: int) -> np.ndarray:
        """One replicate Z ~ N_p(mu, Sigma) with randomly located signals."""
        p = sigma.p
        positions = RngStream(seed=seed, stream_id=stream_id, namespace=NS_SIGNALS).generator()
        mean = np.zeros(p)
        mean[positions.choice(p, size=signal.count(p), replace=False)] = signal.mu
        return sample_mvn(sigma.factor(), mean, RngStream(seed=seed, stream_id=stream_id, namespace=NS_REPLICATES))

    def estimate_replicate(
        self,
        z: np.ndarray,
        context: StructureContext,
        estimators: Sequence[str],
        gw_alpha: float,
        jc_gamma: float,
    ) -> Dict[str, float]:
        scores = ZScores(z=z)
        seqs = context.sequences
        out: Dict[str, float] = {}
        if any(name in estimators for name in FAMILY_ESTIMATORS):
            if seqs["half"].grid == "observed":
                estimate = estimator_service.pi_hat_delta
            else:
                estimate = estimator_service.pi_hat_delta_discrete
            out["half"] = estimate(scores, seqs["half"], method="half").pi_hat
            out["one"] = estimate(scores, seqs["one"], method="one").pi_hat
        if "adap" in estimators:
            out["adap"] = estimator_service.pi_hat_adaptive(scores, seqs["half"], seqs["one"]).pi_hat
        if "half_star" in estimators:
            out["half_star"] = estimator_service.pi_hat_delta_discrete(scores, seqs["half_star"]).pi_hat
        if "one_star" in estimators:
            out["one_star"] = estimator_service.pi_hat_delta_discrete(scores, seqs["one_star"]).pi_hat
        if "gw" in estimators:
            out["gw"] = baselines_service.pi_hat_gw(scores, gw_alpha).pi_hat
        if "jc" in estimators:
            out["jc"] = baselines_service.pi_hat_jc(scores, jc_gamma).pi_hat
        return out

    def _run_cells(self, cfg: ExperimentConfig, estimators: Sequence[str], threads: Optional[int]):
        """Yield (context, signal, {estimator: values}) for every cell of the config."""
        signals = cfg.signal_specs()
        calibration_seed = cfg.seed if cfg.calibration_seed is None else cfg.calibration_seed

        for s_index, text in enumerate(cfg.structures):
            context = self.prepare_structure(text, cfg.calibration, calibration_seed, estimators, threads)
            for k_index, signal in enumerate(signals):
                start_time = time.time()
                cell_id = s_index * len(signals) + k_index

                def replicate(rep: int, signal=signal, cell_id=cell_id) -> Dict[str, float]:
                    z = self.simulate_z(context.sigma, signal, cfg.seed, (cell_id << 32) | rep)
                    return self.estimate_replicate(z, context, estimators, cfg.gw_alpha, cfg.jc_gamma)

                outcomes = map_ordered(replicate, list(range(cfg.replications)), threads)
                values = {name: np.array([o[name] for o in outcomes]) for name in estimators}
                logger.info(
                    f"Cell {context.sigma.label} pi={signal.proportion(context.sigma.p):.4g} mu={signal.mu}: "
                    f"{cfg.replications} replicates in {time.time() - start_time:.2f}s"
                )
                yield context, signal, values

    def run_table_experiment(self, cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentResult:
        """Mean / sd of every requested estimator in every (structure, pi, mu) cell."""
        result = ExperimentResult(config=cfg)
        for context, signal, values in self._run_cells(cfg, cfg.estimators, threads):
            result.mac[context.text] = context.mac
            result.calibration[context.text] = {name: seq.c for name, seq in context.sequences.items()}
            for name in cfg.estimators:
                mean, sd = _mean_sd(values[name])
                result.cells.append(
                    CellSummary(
                        structure=context.text,
                        label=context.sigma.label,
                        mac=context.mac,
                        pi=signal.proportion(context.sigma.p),
                        mu=signal.mu,
                        estimator=name,
                        n=int(values[name].size),
                        mean=mean,
                        sd=sd,
                        values=values[name].tolist(),
                    )
                )
        return result

    def run_coverage_experiment(self, cfg: ExperimentConfig, threads: Optional[int] = None) -> List[CoverageRow]:
        """Fraction of replicates with pi_hat >= pi for theta 0.5, theta 1 and the adaptive estimate."""
        estimators = ("half", "one", "adap")
        alpha = cfg.calibration.alpha
        band = alpha + 3.0 * math.sqrt(alpha * (1.0 - alpha) / cfg.replications)

        rows = []
        for context, signal, values in self._run_cells(cfg, estimators, threads):
            pi = signal.proportion(context.sigma.p)
            for name in estimators:
                exceed = int(np.count_nonzero(values[name] >= pi))
                rows.append(
                    CoverageRow(
                        structure=context.text,
                        pi=pi,
                        mu=signal.mu,
                        estimator=name,
                        n=cfg.replications,
                        exceedances=exceed,
                        rate=exceed / cfg.replications,
                        alpha=alpha,
                        band=band,
                    )
                )
                if exceed / cfg.replications > band:
                    logger.warning(f"Exceedance rate of {name} above band for {context.text} (pi={pi}, mu={signal.mu})")
        return rows

    def run_variance_check(
        self,
        structures: Sequence[str],
        t_grid: Sequence[float] = (1.0, 2.0, 3.0),
        R: int = 2000,
        seed: int = 0,
        threads: Optional[int] = None,
    ) -> List[VarianceRow]:
        """Monte-Carlo Var of the null exceedance proportion against MAC * exp(-t^2 / 2)."""
        rows = []
        for text in structures:
            sigma = dependence_service.build_from_text(text)
            mac = dependence_service.mac(sigma).value
            reps = calibration_service.simulate_null_replicates_parametric(sigma, R, seed, threads)
            abs_values = np.abs(reps.values)
            for t in t_grid:
                frac = np.mean(abs_values > t, axis=1)
                variance = float(np.var(frac, ddof=1)) if R > 1 else 0.0
                reference = mac * math.exp(-t * t / 2.0)
                rows.append(
                    VarianceRow(structure=text, t=t, mac=mac, variance=variance, reference=reference,
                                ratio=variance / reference)
                )
        return rows

    def run_mac_c_table(
        self,
        structures: Sequence[str],
        p: Optional[int] = None,
        R: int = Config.DEFAULT_REPS,
        alpha: float = Config.DEFAULT_ALPHA,
        seed: int = 0,
        threads: Optional[int] = None,
    ) -> List[MacCRow]:
        """MAC level and calibrated c_{p,0.5}, c_{p,1} (observed grid) per structure."""
        rows = []
        settings = CalibrationSettings(R=R, alpha=alpha, grid="observed")
        for text in structures:
            context = self.prepare_structure(_with_dimension(text, p), settings, seed, ("adap",), threads)
            rows.append(
                MacCRow(
                    structure=context.text,
                    label=context.sigma.label,
                    mac=context.mac,
                    c_half=context.sequences["half"].c,
                    c_one=context.sequences["one"].c,
                )
            )
        return rows

    def emit_results(self, res: ExperimentResult, out_dir: Union[str, Path]) -> Dict[str, Path]:
        """
        Write summary.csv, replicates.csv and manifest.json.

        Args:
            res: experiment result
            out_dir: output directory, created if missing

        Returns:
            Mapping of file kind to path
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

        summary = pd.DataFrame(
            [
                {
                    "structure": cell.structure,
                    "label": cell.label,
                    "mac": cell.mac,
                    "pi": cell.pi,
                    "mu": cell.mu,
                    "estimator": cell.estimator,
                    "n": cell.n,
                    "mean": cell.mean,
                    "sd": cell.sd,
                    "c_half": res.calibration.get(cell.structure, {}).get("half"),
                    "c_one": res.calibration.get(cell.structure, {}).get("one"),
                }
                for cell in res.cells
            ]
        )
        replicates = pd.DataFrame(
            [
                {
                    "structure": cell.structure,
                    "pi": cell.pi,
                    "mu": cell.mu,
                    "estimator": cell.estimator,
                    "replicate": index,
                    "value": value,
                }
                for cell in res.cells
                for index, value in enumerate(cell.values)
            ]
        )
        paths = {
            "summary": self._write_frame(summary, out / "summary.csv"),
            "replicates": self._write_frame(replicates, out / "replicates.csv"),
            "manifest": self.write_manifest(out / "manifest.json", res.config.model_dump(), res.mac, res.calibration),
        }
        logger.info(f"Wrote {len(res.cells)} summary rows to {out}")
        return paths

    def emit_rows(self, rows: Sequence[BaseModel], path: Union[str, Path]) -> Path:
        """Write any list of row models as a CSV table."""
        return self._write_frame(pd.DataFrame([row.model_dump() for row in rows]), Path(path))

    def write_manifest(
        self, path: Path, config: dict, mac: Optional[dict] = None, calibration: Optional[dict] = None
    ) -> Path:
        # No timestamps; identical inputs give identical bytes
        manifest = {"version": __version__, "config": config, "seed": config.get("seed")}
        if mac is not None:
            manifest["mac"] = mac
        if calibration is not None:
            manifest["calibration"] = calibration
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path

    def load_config(self, path: Union[str, Path]) -> ExperimentConfig:
        """Read an ExperimentConfig from JSON, TOML, or a manifest.json written by emit_results."""
        path = Path(path)
        if path.suffix.lower() == ".toml":
            with open(path, "rb") as f:
                data = tomllib.load(f)
        else:
            data = json.loads(path.read_text())
        if "config" in data and "structures" not in data:
            data = data["config"]
        return ExperimentConfig.model_validate(data)

    def reproduce(
        self,
        target: str,
        number: str,
        out_dir: Union[str, Path],
        scale: str = "desk",
        seed: int = 0,
        threads: Optional[int] = None,
        sigma_path: Optional[str] = None,
    ) -> Dict[str, Path]:
        """Rerun one published table or figure at desk or full scale."""
        if scale not in ("desk", "full"):
            raise SpecSyntaxError("Unknown scale (valid: desk, full)", scale)
        replications = Config.DESK_REPLICATIONS if scale == "desk" else Config.FULL_REPLICATIONS
        out = Path(out_dir)

        if target == "table" and number == "1":
            rows = self.run_mac_c_table(REFERENCE_STRUCTURES, R=Config.DEFAULT_REPS, alpha=Config.DEFAULT_ALPHA,
                                        seed=seed, threads=threads)
            config = {"target": "table1", "structures": REFERENCE_STRUCTURES, "R": Config.DEFAULT_REPS,
                      "alpha": Config.DEFAULT_ALPHA, "seed": seed}
            return {
                "table": self.emit_rows(rows, out / "table1.csv"),
                "manifest": self.write_manifest(out / "manifest.json", config),
            }

        if target == "table" and number in ("2", "3"):
            cfg = ExperimentConfig(
                structures=REFERENCE_STRUCTURES,
                pis=[0.02] if number == "2" else [0.1],
                mus=REFERENCE_MUS,
                replications=replications,
                estimators=["adap", "gw", "jc"],
                seed=seed,
            )
        elif target == "figure" and number in FIGURE_TARGETS:
            if number in ("6", "7"):
                if not sigma_path:
                    raise SpecSyntaxError(f"Figure {number} needs a correlation matrix file (--sigma)", number)
                structures = [f"file:path={sigma_path}"]
            else:
                structures = [REFERENCE_STRUCTURES[int(number) - 2]]
            cfg = ExperimentConfig(
                structures=structures,
                pis=[0.02, 0.1],
                mus=REFERENCE_MUS,
                replications=replications,
                estimators=["half", "one", "adap"],
                seed=seed,
            )
        else:
            raise SpecSyntaxError("Unknown reproduction target", f"{target} {number}")

        logger.info(f"Reproducing {target} {number} at {scale} scale (N={replications}, seed={seed})")
        return self.emit_results(self.run_table_experiment(cfg, threads), out)

    @staticmethod
    def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return path


harness_service = HarnessService()
