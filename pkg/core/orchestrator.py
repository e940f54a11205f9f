import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Type

import numpy as np
from pydantic import ValidationError
from scipy import stats

import config
from core import adversarial, geometry, landscape, lid, montecarlo, networks, spectra
from core.errors import ConfigError, LabError, require
from core.parallel import substream
from db import codecs, results, svg
from db.storage import (CLOUD_FILE, FAKES_FILE, MODEL_FILE, PLOT_FILE, RESULTS_FILE, RUN_FILE, SAMPLE_IMAGE,
                        JSONStore, OutputDirectory)
from models.adversarial import SgdConfig, SystemSpec, TrainedSystem
from models.experiment import (AdvScalingParams, CountingParams, DilationParams, ExperimentConfig,
                               FakeAscentParams, IsoperimetricParams, LandscapeCensusParams, LidParams,
                               Metric, Params, ReluApproxParams, ReportParams, RunRecord,
                               ShellProbParams, SpectraFitParams, SurfaceDistanceParams)
from models.geometry import CountingState, DilationQuery, ShapeSpec
from models.lid import PointCloud
from models.sampling import Seed
from models.spectra import ImageGrid, SubbandPowers

logger = logging.getLogger("Orchestrator")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

# report rows, in display order, and the subcommands feeding each
REPORT_ROWS: List[Tuple[str, str, Tuple[str, ...]]] = [
    ("shell-concentration", "shell mass 1-(1-a)^n and mean depth R/(n+1)", ("shell-prob", "surface-distance")),
    ("isoperimetric", "non-ball bodies sit closer to their surface", ("isoperimetric",)),
    ("perturbation-scaling", "mean minimal perturbation ~ n^-1/2", ("adv-scaling",)),
    ("landscape", "critical-point census and polynomial ReLU", ("landscape-census", "relu-approx", "fake-ascent")),
    ("wavelet-radius", "1/f ensembles have radius ~ sqrt(n)", ("spectra-fit",)),
    ("volume-growth", "dilation ratios and class-count shrinkage", ("dilation", "counting")),
    ("intrinsic-dimension", "LID estimators recover known dimension", ("lid",)),
]


@dataclass
class Outcome:
    metrics: List[Metric]
    plot: Optional[str] = None
    notes: List[str] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)


def _check(name, value, predicted, tolerance, passed, index=None) -> Metric:
    return Metric(name=name, value=value, predicted=predicted, tolerance=tolerance,
                  passed=bool(passed), index=index)


def _report(name, value, predicted=None, index=None) -> Metric:
    return Metric(name=name, value=value, predicted=predicted, index=index)


class ExperimentOrchestrator:
    """Runs one subcommand end to end: validate, compute, check, write artifacts."""

    def __init__(self):
        self._registry: Dict[str, Tuple[Type[Params], Callable]] = {
            "shell-prob": (ShellProbParams, self._shell_prob),
            "surface-distance": (SurfaceDistanceParams, self._surface_distance),
            "isoperimetric": (IsoperimetricParams, self._isoperimetric),
            "dilation": (DilationParams, self._dilation),
            "counting": (CountingParams, self._counting),
            "spectra-fit": (SpectraFitParams, self._spectra_fit),
            "landscape-census": (LandscapeCensusParams, self._landscape_census),
            "relu-approx": (ReluApproxParams, self._relu_approx),
            "lid": (LidParams, self._lid),
            "adv-scaling": (AdvScalingParams, self._adv_scaling),
            "fake-ascent": (FakeAscentParams, self._fake_ascent),
            "report": (ReportParams, self._consolidate),
        }

    @property
    def subcommands(self) -> Dict[str, Type[Params]]:
        return {name: entry[0] for name, entry in self._registry.items()}

    def parse_params(self, cfg: ExperimentConfig) -> Params:
        if cfg.subcommand not in self._registry:
            raise ConfigError(f"unknown subcommand {cfg.subcommand!r}")
        model = self._registry[cfg.subcommand][0]
        try:
            return model(**cfg.params)
        except ValidationError as e:
            raise ConfigError(f"invalid parameters for {cfg.subcommand}: {e}")

    def run(self, cfg: ExperimentConfig) -> RunRecord:
        params = self.parse_params(cfg)
        handler = self._registry[cfg.subcommand][1]
        seed = Seed(value=cfg.seed)
        record = RunRecord(config_hash=cfg.config_hash(), started_at=datetime.now(timezone.utc), config=cfg)
        logger.info("%s seed=%d -> %s", cfg.subcommand, cfg.seed, cfg.output)

        with OutputDirectory(cfg.output) as out:
            # an unfinished record stays behind if the handler dies
            out.run.save(record.model_dump(mode="json"))
            try:
                outcome = handler(params, seed, out)
            except LabError:
                raise
            except (ValueError, ArithmeticError) as e:
                logger.error("%s failed: %s", cfg.subcommand, e)
                raise ConfigError(str(e))
            checked = [m.passed for m in outcome.metrics if m.passed is not None]
            passed = all(checked)
            record.metrics = outcome.metrics
            record.notes = outcome.notes
            record.artifacts = outcome.artifacts
            record.passed = passed
            record.exit_code = EXIT_OK if passed else EXIT_FAILED
            record.finished_at = datetime.now(timezone.utc)

            if cfg.subcommand != "report":
                results.write_results(out.file(RESULTS_FILE), cfg.subcommand, outcome.metrics)
            if outcome.plot is not None:
                out.file(PLOT_FILE).write_text(outcome.plot, encoding="utf-8")
            out.run.update(record.model_dump(
                mode="json", include={"metrics", "notes", "artifacts", "passed", "exit_code", "finished_at"}))
        logger.info("%s finished: %s", cfg.subcommand, "PASS" if record.passed else "FAIL")
        return record

    # --- montecarlo / geometry ------------------------------------------------

    def _shell_prob(self, p: ShellProbParams, seed: Seed, out) -> Outcome:
        shape = ShapeSpec.ball(p.n, p.radius)
        est = montecarlo.estimate_shell_probability(shape, p.alpha, p.samples, seed)
        exact = geometry.shell_probability_closed_form(p.n, p.alpha)
        return Outcome([
            _check("shell_probability", est.mean, exact, p.sigmas * est.stderr,
                   abs(est.mean - exact) <= p.sigmas * est.stderr),
            _report("stderr", est.stderr),
        ])

    def _surface_distance(self, p: SurfaceDistanceParams, seed: Seed, out) -> Outcome:
        shape = ShapeSpec.ball(p.n, p.radius)
        est = montecarlo.estimate_expected_surface_distance(shape, p.samples, seed)
        exact = geometry.expected_surface_distance_closed_form(p.n, p.radius)
        # |x| = R - d pointwise, so the mean norm is checked against nR/(n+1)
        norm = montecarlo.estimate_mean_norm(shape, p.samples, seed)
        return Outcome([
            _check("expected_surface_distance", est.mean, exact, p.sigmas * est.stderr,
                   abs(est.mean - exact) <= p.sigmas * est.stderr),
            _report("stderr", est.stderr),
            _report("relative_distance", est.mean / p.radius, geometry.expected_relative_surface_distance(p.n)),
            _check("mean_norm", norm.mean, p.radius - exact, p.sigmas * norm.stderr,
                   abs(norm.mean - (p.radius - exact)) <= p.sigmas * norm.stderr),
        ])

    def _isoperimetric(self, p: IsoperimetricParams, seed: Seed, out) -> Outcome:
        sizes = p.axes or [p.aspect] + [1.0] * (p.n - 1)
        shape = ShapeSpec.box(sizes) if p.shape == "box" else ShapeSpec.ellipsoid(sizes)
        cmp = montecarlo.isoperimetric_compare(shape, p.samples, seed, alpha=p.alpha)
        depth, shell = cmp.depth_gap, cmp.shell_gap
        return Outcome([
            _check("depth_gap", depth.mean, None, p.sigmas * depth.stderr, depth.mean > p.sigmas * depth.stderr),
            _check("shell_gap", shell.mean, None, p.sigmas * shell.stderr, shell.mean > p.sigmas * shell.stderr),
            _report("E_shape", cmp.E_shape.mean),
            _report("E_ball", cmp.E_ball.mean, geometry.expected_surface_distance_closed_form(shape.dim, cmp.ball_radius)),
            _report("ratio", cmp.ratio),
            _report("shell_shape", cmp.shell_shape.mean),
            _report("shell_ball", cmp.shell_ball.mean, geometry.shell_probability_closed_form(shape.dim, p.alpha)),
        ], notes=[f"aspect {shape.aspect():.6g}; equal-volume ball R={cmp.ball_radius:.17g}"])

    def _dilation(self, p: DilationParams, seed: Seed, out) -> Outcome:
        query = DilationQuery(alpha=p.alpha, mode=p.mode)
        grid = sorted({int(round(v)) for v in np.geomspace(1, p.n_max, num=9)} | {p.n_max})
        metrics = []
        for i, n in enumerate(grid):
            res = geometry.dilation_volume_ratio(n, query)
            metrics.append(_report("log_ratio", res.log_ratio, index=n))
            if p.mode == "proportional":
                exact = n * math.log1p(p.alpha)
                metrics.append(_check("log_ratio_exact", res.log_ratio, exact, 0.0, res.log_ratio == exact, index=n))
        final = geometry.dilation_volume_ratio(p.n_max, query)
        if p.mode == "inverse_n":
            limit = math.exp(p.alpha)
            metrics.append(_check("ratio_vs_limit", final.ratio, limit, p.tolerance,
                                  abs(final.ratio - limit) <= p.tolerance * limit))
        else:
            metrics.append(_report("saturated", float(final.saturated)))
        return Outcome(metrics)

    def _counting(self, p: CountingParams, seed: Seed, out) -> Outcome:
        state = CountingState(n=p.n, k=p.k, t=p.t)
        metrics = [_report("log_fraction", state.log_fraction, index=0)]
        ok = True
        for step in range(1, p.steps + 1):
            nxt = geometry.advance_counting(state, 1)
            ok &= nxt.log_fraction < state.log_fraction
            metrics.append(_report("log_fraction", nxt.log_fraction,
                                   predicted=state.log_fraction - state.n * math.log(p.k / p.t), index=step))
            state = nxt
        metrics.append(_check("strictly_decreasing", float(ok), 1.0, 0.0, ok))
        return Outcome(metrics)

    # --- spectra -----------------------------------------------------------

    def _spectra_fit(self, p: SpectraFitParams, seed: Seed, out) -> Outcome:
        base = SubbandPowers(l_LL=p.l_LL, h_LH=p.h_LH, h_HL=p.h_HL, h_HH=p.h_HH)
        levels = list(range(p.m_min, p.m_max + 1))
        fit = spectra.radius_scaling_fit(levels, p.samples, base, seed, p.distribution)
        metrics = [_check("slope", fit.slope, 0.5, p.slope_tolerance, abs(fit.slope - 0.5) <= p.slope_tolerance),
                   _report("slope_stderr", fit.slope_stderr)]
        for m, norm in zip(fit.levels, fit.mean_norms):
            metrics.append(_report("mean_norm", norm, index=m))
        for m in levels:
            got = spectra.ensemble_energy_per_pixel(m, base, p.energy_draws, seed.child(1), p.distribution)
            want = spectra.expected_energy_per_pixel(m, base)
            metrics.append(_check("energy_per_pixel", got, want, p.energy_tolerance,
                                  abs(got - want) <= p.energy_tolerance * want, index=m))
        metrics.append(_report("limit_energy_per_pixel", spectra.limit_energy_per_pixel(base)))
        plot = svg.loglog_plot([4.0**m for m in fit.levels], fit.mean_norms, fit.slope, fit.intercept,
                               title="mean |x| against pixel count", ylabel="ln mean |x|")
        sample = spectra.synthesize(p.m_max, base, seed.child(2), p.distribution)
        codecs.save_image(out.file(SAMPLE_IMAGE), sample)
        return Outcome(metrics, plot, artifacts=[SAMPLE_IMAGE])

    # --- landscape ---------------------------------------------------------

    def _landscape_census(self, p: LandscapeCensusParams, seed: Seed, out) -> Outcome:
        res = landscape.census(p.n_vars, p.degree, p.trials, seed, p.box, p.starts)
        return Outcome([
            _check("mean_critical_points", res.mean_critical_points, res.bound_C, 2.0 * res.critical_stderr,
                   res.within_bound),
            _report("mean_minima", res.mean_minima),
            _report("minima_fraction", res.minima_fraction),
            _report("minima_fraction_stderr", res.minima_fraction_stderr),
            _report("degenerate_rate", res.degenerate_rate),
            _report("nonconverged_fraction", res.nonconverged_fraction),
            _report("log_minima_shape", res.log_minima_shape),
        ], notes=[res.bound_note])

    def _relu_approx(self, p: ReluApproxParams, seed: Seed, out) -> Outcome:
        degrees = sorted(set(p.degrees))
        approx = [landscape.relu_poly_approx(d) for d in degrees]
        metrics = [_report("sup_error", a.sup_error, 0.5 * a.abs_error, index=a.degree) for a in approx]
        errors = [a.sup_error for a in approx]
        decreasing = all(b < a for a, b in zip(errors, errors[1:]))
        metrics.append(_check("strictly_decreasing", float(decreasing), 1.0, 0.0, decreasing))
        if 1 in degrees:
            e1 = approx[degrees.index(1)].sup_error
            metrics.append(_check("degree1_error", e1, 0.25, 1e-9, abs(e1 - 0.25) <= 1e-9))
        return Outcome(metrics)

    # --- lid ---------------------------------------------------------------

    def _lid(self, p: LidParams, seed: Seed, out) -> Outcome:
        if p.method == "surface_gap":
            require(p.cloud is None, "surface_gap samples its own ball; a cloud file is not accepted")
            rng = substream(seed, 7)
            shape = ShapeSpec.ball(p.ambient, 1.0)
            cloud = PointCloud(points=montecarlo.sample_uniform_batch(shape, p.points, rng))
            gap = lid.surface_interior_lid_gap(shape, cloud, p.band, p.k, p.queries)
            return Outcome([_report("median_interior", gap.median_interior, p.ambient),
                            _report("median_surface", gap.median_surface, p.ambient),
                            _report("gap", gap.gap)])

        cloud, m, center = self._lid_cloud(p, seed)
        artifacts = []
        if p.save_cloud:
            codecs.save_cloud_csv(out.file(CLOUD_FILE), cloud)
            artifacts.append(CLOUD_FILE)
        if p.method == "box":
            # padded so the maximum point stays in the last cell
            extent = float(np.max(np.ptp(cloud.points, axis=0))) * (1.0 + 1e-9)
            est = lid.box_counting_dimension(cloud, [extent / 2**k for k in p.levels])
            return Outcome([_check("box_counting", est.value, m, p.tolerance, abs(est.value - m) <= p.tolerance)],
                           artifacts=artifacts)
        if p.method == "two_radius":
            est = lid.two_radius_dimension(cloud, center, p.r1, p.r2)
            return Outcome([_check("two_radius", est.value, m, p.tolerance * m,
                                   abs(est.value - m) <= p.tolerance * m)], artifacts=artifacts)
        near = np.linalg.norm(cloud.points - center, axis=1) <= p.query_radius
        inner = np.flatnonzero(near)[:p.queries]
        require(len(inner) > 0, f"no points within query_radius={p.query_radius} of the center")
        values = lid.knn_lid_batch(cloud, cloud.points[inner], p.k)
        med = float(np.median(values))
        return Outcome([_check("knn_median", med, m, p.tolerance * m, abs(med - m) <= p.tolerance * m),
                        _report("queries", float(len(inner)))], artifacts=artifacts)

    def _lid_cloud(self, p: LidParams, seed: Seed) -> Tuple[PointCloud, int, np.ndarray]:
        """The cloud under test, its expected dimension and the query center.

        A cloud file is taken as is and centered on its mean; otherwise m-dimensional
        samples (unit cube for box counting, unit ball else) are padded with zeros.
        """
        if p.cloud is not None:
            try:
                cloud = codecs.load_cloud_csv(Path(p.cloud))
            except OSError as e:
                raise ConfigError(f"cannot read cloud {p.cloud}: {e}")
            require(p.m <= cloud.dim, f"declared dimension m={p.m} exceeds the ambient {cloud.dim}")
            logger.info("loaded %d points in R^%d from %s", cloud.count, cloud.dim, p.cloud)
            return cloud, p.m, cloud.points.mean(axis=0)
        rng = substream(seed, 7)
        m = min(p.m, p.ambient)
        embed = np.zeros((p.points, p.ambient))
        if p.method == "box":
            embed[:, :m] = rng.random((p.points, m))
        else:
            embed[:, :m] = montecarlo.sample_uniform_batch(ShapeSpec.ball(m, 1.0), p.points, rng)
        return PointCloud(points=embed), m, np.zeros(p.ambient)

    # --- adversarial -------------------------------------------------------

    def _adv_scaling(self, p: AdvScalingParams, seed: Seed, out) -> Outcome:
        template = SystemSpec(
            n=p.n_values[0],
            model="idealized" if p.mode == "idealized" else "mlp",
            width=p.width, radius_law=p.radius_law, radius_scale=p.radius_scale,
            negatives=p.negatives, shell_width=p.shell_width, per_class=p.per_class,
        )
        sgd = SgdConfig(lr=p.lr, epochs=p.epochs, batch=p.batch, seed=seed.value)
        saved: Dict[int, str] = {}

        def keep_checkpoint(system: TrainedSystem):
            name = f"model_n{system.spec.n}.hdgm"
            codecs.save_model(out.file(name), system.model)
            saved[system.spec.n] = name

        rep = adversarial.scaling_experiment(p.n_values, p.trials, template, seed, sgd, p.tol,
                                             on_trained=keep_checkpoint)
        tol = p.exponent_tolerance or (0.02 if p.mode == "idealized" else 0.1)
        metrics = []
        for r in rep.rows:
            metrics.append(_report("mean_norm", r.mean_norm, index=r.n))
            metrics.append(_report("empirical_radius", r.empirical_radius, r.shape_radius, index=r.n))
        notes = [f"n={r.n} aborted: {r.aborted}" for r in rep.rows if r.aborted]
        ok = rep.exponent is not None and abs(rep.exponent - rep.predicted_exponent) <= tol
        metrics.append(_check("exponent", rep.exponent, rep.predicted_exponent, tol, ok))
        usable = [r for r in rep.rows if r.mean_norm]
        plot = None
        if len(usable) >= 2 and rep.exponent is not None:
            fit = stats.linregress(np.log([r.n for r in usable]), np.log([r.mean_norm for r in usable]))
            plot = svg.loglog_plot([r.n for r in usable], [r.mean_norm for r in usable], fit.slope,
                                   fit.intercept, title="mean minimal perturbation", ylabel="ln mean |p|")
        return Outcome(metrics, plot, notes, artifacts=[saved[n] for n in sorted(saved)])

    def _fake_ascent(self, p: FakeAscentParams, seed: Seed, out) -> Outcome:
        spec = SystemSpec(n=p.n, model="mlp", width=p.width, per_class=p.per_class)
        sgd = SgdConfig(epochs=p.epochs, seed=seed.value)
        system = networks.train(spec, sgd, seed)
        codecs.save_model(out.file(MODEL_FILE), system.model)
        artifacts = [MODEL_FILE]
        side = math.isqrt(p.n)
        square = side * side == p.n and (side & (side - 1)) == 0
        reached = 0
        finals = []
        metrics = [_report("val_accuracy", system.val_accuracy)]
        for s in range(p.seeds):
            start = adversarial.noise_image(p.n, seed.child(100 + s), -p.noise_scale, p.noise_scale)
            metrics.append(_report("start_class", float(networks.classify(system.model, start)), index=s))
            try:
                res = adversarial.fake_example_ascent(system.model, start, p.target, p.step, p.max_iters)
            except LabError as e:
                logger.warning("seed %d: %s", s, e)
                metrics.append(_report("final_confidence", None, index=s))
                continue
            reached += res.reached
            finals.append(res.image)
            metrics.append(_report("iterations", float(res.iterations), index=s))
            metrics.append(_report("final_confidence", res.confidence_trace[-1], index=s))
            if square:
                name = f"fake_{s}.hdg1"
                codecs.save_image(out.file(name), ImageGrid.from_array(res.image.reshape(side, side)))
                artifacts.append(name)
        if len(finals) >= 2:
            codecs.save_cloud_csv(out.file(FAKES_FILE), PointCloud.from_array(finals))
            artifacts.append(FAKES_FILE)
        frac = reached / p.seeds
        metrics.append(_check("reached_fraction", frac, p.required_fraction, 0.0, frac >= p.required_fraction))
        return Outcome(metrics, artifacts=artifacts)

    # --- report ------------------------------------------------------------

    def _consolidate(self, p: ReportParams, seed: Seed, out) -> Outcome:
        by_row: Dict[str, List[RunRecord]] = {row: [] for row, _, _ in REPORT_ROWS}
        corrupt: List[str] = []
        for run_dir in p.runs:
            doc = JSONStore(Path(run_dir) / RUN_FILE).load()
            try:
                record = RunRecord.model_validate(doc)
            except ValidationError:
                corrupt.append(run_dir)
                logger.warning("skipping %s: missing or corrupt %s", run_dir, RUN_FILE)
                continue
            for row, _, subs in REPORT_ROWS:
                if record.config.subcommand in subs:
                    by_row[row].append(record)

        lines = ["# Acceptance report", ""]
        summary = [["row", "status", "runs", "metrics", "failed"]]
        metrics = []
        if any(by_row.values()):
            lines += ["| row | claim | measured | predicted | status |", "|---|---|---|---|---|"]
        for i, (row, claim, _) in enumerate(REPORT_ROWS):
            records = by_row[row]
            if not records:
                continue
            checked = [m for r in records for m in r.metrics if m.passed is not None]
            failed = [m for m in checked if not m.passed]
            status = "FAIL" if failed or any(r.passed is False for r in records) else "PASS"
            lead = (failed or checked or [None])[0]
            measured = "" if lead is None or lead.value is None else f"{lead.name}={lead.value:.6g}"
            predicted = "" if lead is None or lead.predicted is None else f"{lead.predicted:.6g}"
            lines.append(f"| {row} | {claim} | {measured} | {predicted} | {status} |")
            summary.append([row, status, str(len(records)), str(len(checked)), str(len(failed))])
            metrics.append(Metric(name=row, value=float(len(checked) - len(failed)),
                                  predicted=float(len(checked)), passed=status == "PASS", index=i))
        if not any(by_row.values()):
            lines.append("No runs.")
        if corrupt:
            lines += ["", "## Unreadable runs", ""] + [f"- {d}" for d in corrupt]
        out.file("report.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
        out.file("summary.csv").write_text("".join(",".join(r) + "\n" for r in summary), encoding="utf-8")
        return Outcome(metrics, notes=[f"unreadable: {d}" for d in corrupt])
