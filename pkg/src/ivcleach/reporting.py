"""Config files, run manifests, CSV/summary/event output and SVG charts."""

from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import io
import os
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from . import __version__
from .core import ConfigError, FailureInjection, Position, Protocol, SimConfig
from .engine import ComparisonReport, RoundMetrics, SimResult

ROUNDS_HEADER = ("round", "alive", "died", "total_residual_j", "deliveries", "ch_count")
EVENTS_HEADER = ("round", "kind", "subject", "detail")
ABSENT = "none"

CHART_FILES = {
    "alive": ("live_nodes.svg", "Number Of Live Nodes"),
    "dead": ("dead_nodes.svg", "Number Of Dead Nodes"),
    "energy": ("average_residual_energy.svg", "Average Residual Energy"),
}

_INT, _FLOAT = int, float


def _parse_kills(text: str) -> tuple:
    kills = []
    for item in text.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        parts = [int(p) for p in item.split(":")]
        if len(parts) not in (2, 3):
            raise ValueError(f"kill entry {item!r} must be ROUND:NODE or ROUND:NODE:SLOT")
        kills.append(tuple(parts))
    return tuple(kills)


CONFIG_KEYS = {
    "area_width": _FLOAT,
    "area_height": _FLOAT,
    "n_nodes": _INT,
    "bs_x": _FLOAT,
    "bs_y": _FLOAT,
    "initial_energy": _FLOAT,
    "max_rounds": _INT,
    "k_clusters": _INT,
    "protocol": lambda s: Protocol(s.strip().upper()),
    "leach_p": _FLOAT,
    "seed": _INT,
    "e_elec": _FLOAT,
    "eps_fs": _FLOAT,
    "eps_mp": _FLOAT,
    "e_da": _FLOAT,
    "data_bits": _INT,
    "ctrl_bits": _INT,
    "fail_prob": _FLOAT,
    "kill": _parse_kills,
    "tie_break": lambda s: s.strip().lower(),
}

_RADIO_KEYS = ("e_elec", "eps_fs", "eps_mp", "e_da", "data_bits", "ctrl_bits")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def build_config(raw: Mapping[str, object]) -> SimConfig:
    """Turn a mapping of config keys (strings or already-typed values) into a SimConfig."""
    parsed = {}
    for key, value in raw.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(key, f"unknown key (known: {', '.join(sorted(CONFIG_KEYS))})")
        if isinstance(value, str):
            try:
                value = CONFIG_KEYS[key](value)
            except ValueError as exc:
                raise ConfigError(key, f"cannot parse {value!r}: {exc}") from None
        parsed[key] = value

    defaults = SimConfig()
    radio = dataclasses.replace(
        defaults.radio, **{k: parsed.pop(k) for k in _RADIO_KEYS if k in parsed}
    )
    bs = Position(
        float(parsed.pop("bs_x", defaults.bs_pos.x)), float(parsed.pop("bs_y", defaults.bs_pos.y))
    )
    fail_prob = float(parsed.pop("fail_prob", 0.0))
    kills = parsed.pop("kill", ())
    if kills and fail_prob:
        raise ConfigError("kill", "cannot combine scripted kills with fail_prob")
    if kills:
        failures = FailureInjection.scripted(kills)
    elif fail_prob:
        failures = FailureInjection.probabilistic(fail_prob)
    else:
        failures = FailureInjection()
    return dataclasses.replace(
        defaults, radio=radio, bs_pos=bs, failure_injection=failures, **parsed
    )


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping] = None) -> SimConfig:
    """Built-in defaults, then the file at ``path``, then ``overrides``."""
    raw: dict = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        raw.update(parse_config_text(text, source=str(path)))
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    return build_config(raw)


def config_to_text(config: SimConfig) -> str:
    """Serialise ``config`` in the flat key-value format accepted by :func:`load_config`."""
    r = config.radio
    lines = [
        f"area_width = {config.area_width!r}",
        f"area_height = {config.area_height!r}",
        f"n_nodes = {config.n_nodes}",
        f"bs_x = {config.bs_pos.x!r}",
        f"bs_y = {config.bs_pos.y!r}",
        f"initial_energy = {config.initial_energy!r}",
        f"max_rounds = {config.max_rounds}",
        f"k_clusters = {config.k_clusters}",
        f"protocol = {config.protocol.value}",
        f"leach_p = {config.leach_p!r}",
        f"seed = {config.seed}",
        f"tie_break = {config.tie_break}",
        f"e_elec = {r.e_elec!r}",
        f"eps_fs = {r.eps_fs!r}",
        f"eps_mp = {r.eps_mp!r}",
        f"e_da = {r.e_da!r}",
        f"data_bits = {r.data_bits}",
        f"ctrl_bits = {r.ctrl_bits}",
    ]
    fi = config.failure_injection
    if fi.mode == "probabilistic":
        lines.append(f"fail_prob = {fi.prob!r}")
    elif fi.mode == "scripted":
        lines.append("kill = " + ",".join(f"{a}:{b}:{c}" for a, b, c in fi.kills))
    return "\n".join(lines) + "\n"


def write_manifest(config: SimConfig, path: Union[str, Path], outputs: Iterable[str]) -> Path:
    """Record how to reproduce a run; written before the simulation starts."""
    path = Path(path)
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    body = (
        f"# ivcleach run manifest\n"
        f"# tool_version = {__version__}\n"
        f"# timestamp = {stamp}\n"
        f"# outputs = {', '.join(outputs)}\n"
        + config_to_text(config)
    )
    _write_text(path, body)
    return path


def _write_text(path: Path, text: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None


def rounds_csv_text(metrics: Sequence[RoundMetrics]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROUNDS_HEADER)
    for m in metrics:
        writer.writerow((
            m.round, m.alive, m.died_this_round, f"{m.total_residual:.9f}", m.deliveries, m.ch_count
        ))
    return buf.getvalue()


def write_rounds_csv(result: SimResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    _write_text(path, rounds_csv_text(result.metrics))
    return path


def read_rounds_csv(path: Union[str, Path]) -> list[RoundMetrics]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != ROUNDS_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        return [
            RoundMetrics(
                round=int(r[0]), alive=int(r[1]), died_this_round=int(r[2]),
                total_residual=float(r[3]), deliveries=int(r[4]), ch_count=int(r[5]),
            )
            for r in reader
        ]


def write_events(result: SimResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EVENTS_HEADER)
    for e in result.events:
        writer.writerow((e.round, e.kind.value, e.subject, e.detail))
    _write_text(path, buf.getvalue())
    return path


def _mark(value) -> str:
    return ABSENT if value is None else str(value)


def _fmt(value) -> str:
    if value is None:
        return ABSENT
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def summary_text(obj: Union[SimResult, ComparisonReport]) -> str:
    if isinstance(obj, SimResult):
        c = obj.config
        final_alive = obj.metrics[-1].alive if obj.metrics else c.n_nodes
        pairs = [
            ("status", "complete" if obj.complete else "partial"),
            ("protocol", c.protocol.value),
            ("seed", c.seed),
            ("n_nodes", c.n_nodes),
            ("max_rounds", c.max_rounds),
            ("rounds_simulated", obj.rounds),
            ("fnd", _mark(obj.fnd)),
            ("hnd", _mark(obj.hnd)),
            ("lnd", _mark(obj.lnd)),
            ("final_alive", final_alive),
            ("total_deliveries", obj.total_deliveries),
        ]
    else:
        a, b = obj.protocol_a.value, obj.protocol_b.value
        pairs = [
            ("status", "complete"),
            ("protocol_a", a),
            ("protocol_b", b),
            ("seeds", ",".join(str(s.seed) for s in obj.per_seed)),
        ]
        for s in obj.per_seed:
            pairs += [
                (f"seed.{s.seed}.lnd_{a}", _mark(s.lnd_a)),
                (f"seed.{s.seed}.lnd_{b}", _mark(s.lnd_b)),
                (f"seed.{s.seed}.ratio", _fmt(s.ratio)),
                (f"seed.{s.seed}.fnd_{a}", _mark(s.fnd_a)),
                (f"seed.{s.seed}.fnd_{b}", _mark(s.fnd_b)),
                (f"seed.{s.seed}.max10_deaths_{a}", s.steep_a),
                (f"seed.{s.seed}.max10_deaths_{b}", s.steep_b),
            ]
        pairs += [
            ("ratio_mean", _fmt(obj.mean_ratio)),
            ("ratio_min", _fmt(obj.min_ratio)),
            ("ratio_max", _fmt(obj.max_ratio)),
            ("ratio_seeds_used", len(obj.ratios())),
            (f"fnd_mean_{a}", _fmt(obj.mean_fnd("a"))),
            (f"fnd_mean_{b}", _fmt(obj.mean_fnd("b"))),
            (f"seeds_{a}_steeper", obj.steeper_a_count),
        ]
    return "".join(f"{k} = {v}\n" for k, v in pairs)


def write_summary(obj: Union[SimResult, ComparisonReport], path: Union[str, Path]) -> Path:
    path = Path(path)
    _write_text(path, summary_text(obj))
    return path


def read_summary(path: Union[str, Path]) -> dict[str, str]:
    return parse_config_text(Path(path).read_text(), source=str(path))


def _series(metrics: Sequence[RoundMetrics]):
    n = metrics[0].alive + metrics[0].died_this_round
    rounds = [m.round for m in metrics]
    return {
        "alive": (rounds, [m.alive for m in metrics]),
        "dead": (rounds, [n - m.alive for m in metrics]),
        "energy": (rounds, [m.total_residual / n for m in metrics]),
    }


def emit_charts(
    series: Mapping[str, Union[SimResult, Sequence[RoundMetrics]]],
    out_dir: Union[str, Path],
    partial: bool = False,
) -> list[Path]:
    """Write live/dead/average-energy line charts, one line per labelled series.

    SVG output is byte-stable: no timestamps, fixed element ids.
    """
    if not series:
        raise ValueError("no series to chart")
    data = {}
    for label, item in series.items():
        metrics = item.metrics if isinstance(item, SimResult) else list(item)
        if not metrics:
            raise ValueError(f"series {label!r} is empty; nothing to chart")
        data[label] = _series(metrics)

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    with matplotlib.rc_context({"svg.hashsalt": "ivcleach", "svg.fonttype": "none"}):
        for key, (fname, title) in CHART_FILES.items():
            fig, ax = plt.subplots(figsize=(7, 4.5))
            for label, s in data.items():
                x, y = s[key]
                ax.plot(x, y, label=label, linewidth=1.2)
            ax.set_title(title + (" (partial run)" if partial else ""))
            ax.set_xlabel("Round")
            ax.set_ylabel(title + (" (J)" if key == "energy" else ""))
            ax.grid(True, linewidth=0.4, alpha=0.5)
            ax.legend()
            fig.tight_layout()
            path = out_dir / fname
            try:
                fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
            except OSError as exc:
                raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None
            finally:
                plt.close(fig)
            written.append(path)
    return written
