"""2D Cahn-Hilliard spinodal decomposition of a binary A-B alloy.

Explicit Euler in time, conservative flux-form finite differences in space,
periodic boundaries on every side. The field is the local B concentration c.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..constants import FLOAT_FORMAT
from ..errors import DomainError, FieldOutOfRange, InvalidParams
from ..stage import StageContext, StageOutcome

logger = logging.getLogger(__name__)

STENCILS = ("central", "compact")


class CHParams(BaseModel):
    """Physical and numerical parameters; R and T enter only as the product RT."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    nx: int = Field(128, description="Grid points along axis 0.")
    ny: int = Field(128, description="Grid points along axis 1.")
    dx: float = 1.0
    dt: float = 0.01
    n_steps: int = 10000
    snapshot_interval: int = 500
    c0: float = Field(0.5, description="Mean B concentration.")
    noise_amplitude: float = 0.01
    seed: int = 0
    RT: float = Field(1.0, description="Energy scale R*T.")
    L: float = Field(3.0, description="Atomic interaction parameter.")
    a_c: float = Field(1.0, description="Gradient energy coefficient.")
    D_A: float = 1.0
    D_B: float = 1.0

    @classmethod
    def from_inputs(cls, values: Mapping[str, Any]) -> "CHParams":
        """Build from an inputs-object mapping; missing keys take defaults."""
        try:
            params = cls(**dict(values))
        except ValidationError as e:
            raise InvalidParams(f"invalid Cahn-Hilliard parameters: {e}") from e
        validate_params(params)
        return params


def validate_params(p: CHParams) -> None:
    """Raise InvalidParams naming the first violated invariant."""
    checks = [
        (p.nx >= 8 and p.ny >= 8, f"grid must be at least 8x8, got {p.nx}x{p.ny}"),
        (p.dx > 0, f"dx must be > 0, got {p.dx}"),
        (p.dt > 0, f"dt must be > 0, got {p.dt}"),
        (p.n_steps >= 0, f"n_steps must be >= 0, got {p.n_steps}"),
        (p.snapshot_interval >= 1, f"snapshot_interval must be >= 1, got {p.snapshot_interval}"),
        (p.noise_amplitude >= 0, f"noise_amplitude must be >= 0, got {p.noise_amplitude}"),
        (p.RT > 0, f"RT must be > 0, got {p.RT}"),
        (p.a_c > 0, f"a_c must be > 0, got {p.a_c}"),
        (p.D_A > 0 and p.D_B > 0, "diffusion coefficients must be > 0"),
        (
            0 < p.c0 - p.noise_amplitude and p.c0 + p.noise_amplitude < 1,
            f"c0 +/- noise_amplitude must stay inside (0, 1), got c0={p.c0}, "
            f"noise_amplitude={p.noise_amplitude}",
        ),
    ]
    for ok, message in checks:
        if not ok:
            raise InvalidParams(message)


def _check_domain(c) -> None:
    c = np.asarray(c, dtype=np.float64)
    if not np.all((c > 0) & (c < 1)):
        raise DomainError("concentration must lie in the open interval (0, 1)")


def ch_init(p: CHParams) -> np.ndarray:
    """c0 plus uniform noise in [-noise_amplitude, noise_amplitude], seeded Philox stream."""
    validate_params(p)
    rng = np.random.Generator(np.random.Philox(key=p.seed & (2**64 - 1)))
    u = rng.uniform(-1.0, 1.0, size=(p.nx, p.ny))
    return p.c0 + p.noise_amplitude * u


def g_chem(c, p: CHParams):
    """Chemical free energy density RT[c ln c + (1-c) ln(1-c)] + L c(1-c)."""
    _check_domain(c)
    c = np.asarray(c, dtype=np.float64)
    value = p.RT * (c * np.log(c) + (1.0 - c) * np.log1p(-c)) + p.L * c * (1.0 - c)
    return float(value) if value.ndim == 0 else value


def g_chem_curvature(c, p: CHParams):
    _check_domain(c)
    c = np.asarray(c, dtype=np.float64)
    value = p.RT / (c * (1.0 - c)) - 2.0 * p.L
    return float(value) if value.ndim == 0 else value


def laplacian(c: np.ndarray, dx: float) -> np.ndarray:
    """Periodic 5-point Laplacian."""
    return (
        np.roll(c, 1, axis=0)
        + np.roll(c, -1, axis=0)
        + np.roll(c, 1, axis=1)
        + np.roll(c, -1, axis=1)
        - 4.0 * c
    ) / dx**2


def mu_field(c: np.ndarray, p: CHParams) -> np.ndarray:
    """Diffusion potential RT[ln c - ln(1-c)] + L(1-2c) - a_c lap(c)."""
    _check_domain(c)
    return (
        p.RT * (np.log(c) - np.log1p(-c))
        + p.L * (1.0 - 2.0 * c)
        - p.a_c * laplacian(c, p.dx)
    )


def mobility(c, p: CHParams):
    """[D_A/RT c + D_B/RT (1-c)] c(1-c); weighting as written in the model equations."""
    c = np.asarray(c, dtype=np.float64)
    value = (p.D_A / p.RT * c + p.D_B / p.RT * (1.0 - c)) * c * (1.0 - c)
    return float(value) if value.ndim == 0 else value


def ch_step(c: np.ndarray, p: CHParams) -> np.ndarray:
    """One explicit Euler step of dc/dt = div(M grad mu) in flux form."""
    mu = mu_field(c, p)
    m = mobility(c, p)
    div = np.zeros_like(c)
    for axis in (0, 1):
        # face i+1/2 between cell i and i+1
        m_face = 0.5 * (m + np.roll(m, -1, axis=axis))
        flux = m_face * (np.roll(mu, -1, axis=axis) - mu) / p.dx
        div += (flux - np.roll(flux, 1, axis=axis)) / p.dx
    updated = c + p.dt * div
    if not np.all(np.isfinite(updated)) or not np.all((updated > 0) & (updated < 1)):
        raise FieldOutOfRange(
            f"concentration left (0, 1) (min {np.nanmin(updated):.6g}, "
            f"max {np.nanmax(updated):.6g}); dt={p.dt} is likely unstable"
        )
    return updated


def total_free_energy(c: np.ndarray, p: CHParams, stencil: str = "central") -> float:
    """G = sum(g_chem + a_c/2 |grad c|^2) dx^2.

    ``central`` uses (c[i+1] - c[i-1]) / 2dx. ``compact`` uses forward
    differences, the variational partner of the 5-point Laplacian; it is
    non-increasing step by step, not only between sampled steps.
    """
    if stencil == "central":
        gx = (np.roll(c, -1, axis=0) - np.roll(c, 1, axis=0)) / (2.0 * p.dx)
        gy = (np.roll(c, -1, axis=1) - np.roll(c, 1, axis=1)) / (2.0 * p.dx)
    elif stencil == "compact":
        gx = (np.roll(c, -1, axis=0) - c) / p.dx
        gy = (np.roll(c, -1, axis=1) - c) / p.dx
    else:
        raise ValueError(f"unknown stencil '{stencil}', expected one of {STENCILS}")
    density = g_chem(c, p) + 0.5 * p.a_c * (gx**2 + gy**2)
    return float(np.sum(density) * p.dx**2)


def stable_time_step(p: CHParams) -> float:
    """Linearized explicit bound 2 / (M(c0) k2 (|g''(c0)| + a_c k2)), k2 = 8/dx^2."""
    k2 = 8.0 / p.dx**2
    return 2.0 / (mobility(p.c0, p) * k2 * (abs(g_chem_curvature(p.c0, p)) + p.a_c * k2))


def write_pgm(c: np.ndarray, path: Path) -> Path:
    """Binary 8-bit PGM, c in [0, 1] mapped linearly to [0, 255]."""
    pixels = np.clip(np.rint(np.asarray(c) * 255.0), 0, 255).astype(np.uint8)
    rows, cols = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(pixels).tobytes())
    return path


def write_field_csv(c: np.ndarray, path: Path) -> Path:
    np.savetxt(path, c, fmt=FLOAT_FORMAT, delimiter=",")
    return path


@dataclass(frozen=True)
class Snapshot:
    step: int
    time: float
    image: Optional[Path] = None
    field_dump: Optional[Path] = None


@dataclass(frozen=True)
class TimeSeriesOut:
    """Energy and mean concentration sampled at the snapshot cadence."""

    steps: Tuple[int, ...]
    times: Tuple[float, ...]
    energy: Tuple[float, ...]
    mean_concentration: Tuple[float, ...]

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class SimulationResult:
    snapshots: List[Snapshot]
    series: TimeSeriesOut
    initial_field: np.ndarray = field(repr=False)
    final_field: np.ndarray = field(repr=False)

    @property
    def final_energy(self) -> float:
        return self.series.energy[-1]

    @property
    def equilibrium_concentrations(self) -> Tuple[float, float]:
        return float(self.final_field.min()), float(self.final_field.max())


def run_simulation(
    p: CHParams, out_dir: Optional[Path] = None, stencil: str = "central"
) -> SimulationResult:
    """Run n_steps from ch_init, sampling every snapshot_interval steps and at the end.

    With ``out_dir`` set, each sample also writes ``step<NNNNNN>.pgm`` and
    ``step<NNNNNN>.csv`` there.
    """
    c = ch_init(p)
    initial = c.copy()

    dt_max = stable_time_step(p)
    if p.dt > 0.5 * dt_max:
        logger.warning(
            "dt=%g exceeds half the linear stability bound %g; the run may blow up",
            p.dt,
            dt_max,
        )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    snapshots: List[Snapshot] = []
    steps: List[int] = []
    times: List[float] = []
    energy: List[float] = []
    means: List[float] = []

    def sample(step: int) -> None:
        t = step * p.dt
        image = dump = None
        if out_dir is not None:
            image = write_pgm(c, out_dir / f"step{step:06d}.pgm")
            dump = write_field_csv(c, out_dir / f"step{step:06d}.csv")
        snapshots.append(Snapshot(step=step, time=t, image=image, field_dump=dump))
        steps.append(step)
        times.append(t)
        energy.append(total_free_energy(c, p, stencil))
        means.append(float(np.mean(c)))

    sample(0)
    for step in range(1, p.n_steps + 1):
        try:
            c = ch_step(c, p)
        except FieldOutOfRange as e:
            raise FieldOutOfRange(str(e), step=step) from e
        if step % p.snapshot_interval == 0 or step == p.n_steps:
            sample(step)
            logger.debug("step %d: G=%.12g", step, energy[-1])

    series = TimeSeriesOut(
        steps=tuple(steps), times=tuple(times), energy=tuple(energy), mean_concentration=tuple(means)
    )
    return SimulationResult(
        snapshots=snapshots, series=series, initial_field=initial, final_field=c
    )


def _write_rows(path: Path, header: str, rows) -> Path:
    lines = [header]
    lines.extend(",".join(str(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _fmt(value: float) -> str:
    return FLOAT_FORMAT % value


def run_stage(ctx: StageContext) -> StageOutcome:
    """Engine entry point of the cahn-hilliard solver realization."""
    p = CHParams.from_inputs(ctx.params)
    snapshot_dir = ctx.artifact_dir("snapshots")
    result = run_simulation(p, snapshot_dir)

    outputs: Dict[str, Path] = {}
    wanted = {port.name for port in ctx.manifest.outputs}
    artifacts = ctx.artifacts_dir
    if "snapshots" in wanted:
        outputs["snapshots"] = _write_rows(
            ctx.artifact_path("snapshots"),
            "step,time,image,field",
            (
                (
                    s.step,
                    _fmt(s.time),
                    s.image.relative_to(artifacts).as_posix(),
                    s.field_dump.relative_to(artifacts).as_posix(),
                )
                for s in result.snapshots
            ),
        )
    if "energy_series" in wanted:
        series = result.series
        outputs["energy_series"] = _write_rows(
            ctx.artifact_path("energy_series"),
            "step,time,energy,mean_concentration",
            (
                (n, _fmt(t), _fmt(g), _fmt(m))
                for n, t, g, m in zip(
                    series.steps, series.times, series.energy, series.mean_concentration
                )
            ),
        )
    if "final_energy" in wanted:
        path = ctx.artifact_path("final_energy")
        path.write_text(_fmt(result.final_energy) + "\n", encoding="utf-8")
        outputs["final_energy"] = path
    if "final_field" in wanted:
        outputs["final_field"] = write_field_csv(
            result.final_field, ctx.artifact_path("final_field")
        )

    low, high = result.equilibrium_concentrations
    message = (
        f"{p.n_steps} steps on {p.nx}x{p.ny}; G {result.series.energy[0]:.6g} -> "
        f"{result.final_energy:.6g}; equilibrium concentrations {low:.4f} / {high:.4f}"
    )
    return StageOutcome(outputs=outputs, message=message)
