"""Command-line front end: plan cuts, train models, profile FLOPs, verify numerics.

Experiments are described by a flat TOML config that CLI flags override.
All output files are written atomically (temp + rename) so interrupted
runs never leave truncated CSVs.
"""
from __future__ import annotations

import os
import statistics
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import data as data_mod
from . import flops, hqnn, simulator, verification
from .circuit import GateKind, build_ansatz
from .cutting import design_cutting_points, generate_subcircuits, graph_to_dot, plan_to_json, validate


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "digits"
    n: int = 8
    m: int = 0                     # 0 = uncut original circuit
    layers: int = 2
    encoder: str = "angle"
    epochs: int = 50
    batch_size: int = 5
    learning_rate: float = 0.01
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    subsample: int = 0             # 0 = full dataset
    split_ratio: float = 0.8
    out: str = "runs"
    digits_csv: str = "digits.csv"
    mnist_images: str = ""
    mnist_labels: str = ""

    def check(self) -> None:
        if self.dataset not in ("digits", "mnist"):
            raise ValueError(f"dataset must be digits or mnist, got {self.dataset!r}")
        if self.encoder not in ("angle", "amplitude"):
            raise ValueError(f"encoder must be angle or amplitude, got {self.encoder!r}")
        if not (self.m == 0 or 2 <= self.m <= self.n):
            raise ValueError(f"need m = 0 or 2 <= m <= n, got m={self.m}, n={self.n}")
        if self.epochs < 1:
            raise ValueError(f"need epochs >= 1, got {self.epochs}")

    @property
    def label(self) -> str:
        return str(self.n) if self.m == 0 else f"{self.n}-{self.m}"


def config_to_toml(config: ExperimentConfig) -> str:
    lines = []
    for f in fields(config):
        value = getattr(config, f.name)
        if isinstance(value, str):
            lines.append(f'{f.name} = "{value}"')
        elif isinstance(value, tuple):
            lines.append(f"{f.name} = [{', '.join(str(v) for v in value)}]")
        else:
            lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def config_from_toml(text: str) -> ExperimentConfig:
    raw = tomllib.loads(text)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "seeds" in raw:
        raw["seeds"] = tuple(int(s) for s in raw["seeds"])
    config = ExperimentConfig(**raw)
    config.check()
    return config


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp-{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


def _load_config(config_path: str | None, overrides: dict) -> ExperimentConfig:
    if config_path:
        config = config_from_toml(Path(config_path).read_text())
    else:
        config = ExperimentConfig()
    filtered = {k: v for k, v in overrides.items() if v is not None}
    if "seeds" in filtered:
        filtered["seeds"] = tuple(int(s) for s in str(filtered["seeds"]).split(","))
    config = replace(config, **filtered)
    config.check()
    return config


_SHARED_FLAGS = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                 help="TOML experiment config; flags override it."),
    click.option("--dataset", type=click.Choice(["digits", "mnist"]), default=None),
    click.option("--n", type=int, default=None, help="Qubits of the original circuit."),
    click.option("--m", type=int, default=None, help="Device qubits (0 = uncut)."),
    click.option("--layers", type=int, default=None),
    click.option("--encoder", type=click.Choice(["angle", "amplitude"]), default=None),
    click.option("--epochs", type=int, default=None),
    click.option("--batch-size", type=int, default=None),
    click.option("--lr", "learning_rate", type=float, default=None),
    click.option("--seeds", type=str, default=None, help="Comma-separated seed list."),
    click.option("--subsample", type=int, default=None, help="Stratified subsample size (0 = all)."),
    click.option("--out", type=str, default=None, help="Output directory."),
    click.option("--digits-csv", type=str, default=None),
    click.option("--mnist-images", type=str, default=None),
    click.option("--mnist-labels", type=str, default=None),
]


def shared_flags(command):
    for flag in reversed(_SHARED_FLAGS):
        command = flag(command)
    return command


@click.group()
def main():
    """Cut large quantum layers to fit small devices and train them end to end."""


@main.command()
@shared_flags
@click.option("--dot", "dot_path", type=str, default=None, help="Also write a DOT rendering here.")
def plan(config_path, dot_path, **overrides):
    """Design cutting points for the benchmark circuit and emit the plan as JSON."""
    config = _load_config(config_path, overrides)
    if config.encoder == "amplitude" and config.m:
        raise click.ClickException("amplitude encoding cannot be combined with cutting; use --m 0")
    circuit = build_ansatz(config.n, config.layers, encoder=config.encoder)
    device = config.m or config.n
    cut_plan = design_cutting_points(circuit, device)
    graph = generate_subcircuits(circuit, cut_plan)
    violations = validate(graph, device)
    out = Path(config.out)
    plan_path = out / f"plan_{config.n}-{device}.json"
    write_atomic(plan_path, plan_to_json(circuit, cut_plan, graph))
    click.echo(f"{len(cut_plan.cuts)} cut(s), {len(graph.links)} boundary link(s), "
               f"{cut_plan.num_subcircuits} subcircuit(s) -> {plan_path}")
    if dot_path:
        write_atomic(Path(dot_path), graph_to_dot(graph))
    for violation in violations:
        click.echo(f"INVALID: {violation}", err=True)
    if violations:
        sys.exit(1)


def _load_dataset(config: ExperimentConfig) -> data_mod.Dataset:
    if config.dataset == "digits":
        dataset = data_mod.load_digits(config.digits_csv)
    else:
        if not config.mnist_images or not config.mnist_labels:
            raise click.ClickException("mnist needs --mnist-images and --mnist-labels")
        dataset = data_mod.load_mnist(config.mnist_images, config.mnist_labels)
    if config.subsample:
        dataset = data_mod.subsample(dataset, config.subsample, seed=0)
    return dataset


def _build_quantum(config: ExperimentConfig, m: int):
    circuit = build_ansatz(config.n, config.layers, encoder=config.encoder)
    if m == 0:
        if circuit.num_wires > simulator.max_qubits():
            raise click.ClickException(
                f"uncut {circuit.num_wires}-qubit simulation exceeds the "
                f"{simulator.max_qubits()}-qubit cap; use --m to cut it to a smaller device "
                f"or raise {simulator.MAX_QUBITS_ENV}")
        return circuit
    if config.encoder == "amplitude":
        raise click.ClickException("amplitude encoding cannot be combined with cutting; use --m 0")
    graph = generate_subcircuits(circuit, design_cutting_points(circuit, m))
    violations = validate(graph, m)
    if violations:
        raise click.ClickException("generated subcircuit graph is invalid: " + "; ".join(violations))
    return graph


def _curves_csv(record: hqnn.TrainingRecord) -> str:
    lines = ["epoch,train_accuracy,train_loss,val_accuracy,val_loss"]
    for epoch in range(record.epochs):
        lines.append(f"{epoch + 1},{record.train_accuracy[epoch]!r},{record.train_loss[epoch]!r},"
                     f"{record.val_accuracy[epoch]!r},{record.val_loss[epoch]!r}")
    return "\n".join(lines) + "\n"


def _train_config(config: ExperimentConfig, m: int, dataset: data_mod.Dataset,
                  out: Path) -> list[hqnn.TrainingRecord]:
    label = str(config.n) if m == 0 else f"{config.n}-{m}"
    records = []
    for seed in config.seeds:
        train_set, val_set = data_mod.split(dataset, config.split_ratio, seed=seed)
        quantum = _build_quantum(config, m)
        model = hqnn.init_model(quantum, dataset.features.shape[1], data_mod.NUM_CLASSES,
                                seed=seed, encoder=config.encoder)
        record = hqnn.train(model, train_set, val_set, epochs=config.epochs,
                            batch_size=config.batch_size, learning_rate=config.learning_rate,
                            seed=seed)
        write_atomic(out / f"curves_{label}_{seed}.csv", _curves_csv(record))
        hqnn.save_checkpoint(model, None, seed, out / f"model_{label}_{seed}.json")
        records.append(record)
        click.echo(f"{label} seed {seed}: train acc {record.train_accuracy[-1]:.3f}, "
                   f"val acc {record.val_accuracy[-1]:.3f}")
    return records


def _summary_rows(label: str, records: list[hqnn.TrainingRecord]) -> list[str]:
    rows = [f"{label},{r.seed},{r.train_accuracy[-1]!r},{r.train_loss[-1]!r},"
            f"{r.val_accuracy[-1]!r},{r.val_loss[-1]!r}" for r in records]
    for name, reducer in (("mean", statistics.fmean), ("std", _std)):
        stats = [reducer([getattr(r, key)[-1] for r in records])
                 for key in ("train_accuracy", "train_loss", "val_accuracy", "val_loss")]
        rows.append(f"{label},{name}," + ",".join(repr(s) for s in stats))
    return rows


def _std(values) -> float:
    return statistics.pstdev(values) if len(values) > 1 else 0.0


@main.command()
@shared_flags
@click.option("--compare", is_flag=True, help="Also train the uncut original for a side-by-side summary.")
@click.option("--plot", "plot_svg", is_flag=True, help="Emit SVG learning curves next to the CSVs.")
def train(config_path, compare, plot_svg, **overrides):
    """Train the hybrid model per seed and write learning-curve CSVs plus a summary."""
    config = _load_config(config_path, overrides)
    dataset = _load_dataset(config)
    out = Path(config.out)
    runs = {config.label: _train_config(config, config.m, dataset, out)}
    if compare and config.m:
        runs[str(config.n)] = _train_config(config, 0, dataset, out)
    lines = ["config,seed,final_train_accuracy,final_train_loss,final_val_accuracy,final_val_loss"]
    for label, records in runs.items():
        lines.extend(_summary_rows(label, records))
    write_atomic(out / "summary.csv", "\n".join(lines) + "\n")
    if compare and config.m:
        cut_mean = statistics.fmean(r.val_accuracy[-1] for r in runs[config.label])
        orig_mean = statistics.fmean(r.val_accuracy[-1] for r in runs[str(config.n)])
        click.echo(f"mean final val accuracy: {config.label} = {cut_mean:.3f}, "
                   f"{config.n} = {orig_mean:.3f} (gap {orig_mean - cut_mean:+.3f})")
    if plot_svg:
        _write_plots(out, runs)
    click.echo(f"summary -> {out / 'summary.csv'}")


def _write_plots(out: Path, runs: dict[str, list[hqnn.TrainingRecord]]) -> None:
    try:
        import matplotlib
        matplotlib.use("svg")
        import matplotlib.pyplot as plt
    except ImportError:
        click.echo("matplotlib not installed; skipping plots", err=True)
        return
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5), sharex=True)
    for label, records in runs.items():
        epochs = range(1, records[0].epochs + 1)
        for axis, key, title in ((axes[0], "train_accuracy", "training"),
                                 (axes[1], "val_accuracy", "validation")):
            mean = np.mean([getattr(r, key) for r in records], axis=0)
            axis.plot(epochs, mean, label=label)
            axis.set_title(f"{title} accuracy")
            axis.set_xlabel("epoch")
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(out / "curves.svg")
    plt.close(fig)


@main.command()
@click.option("--ns", default="4,6,8,10", help="Comma-separated original qubit counts.")
@click.option("--ms", default="2,3,4", help="Comma-separated device qubit counts.")
@click.option("--layers", type=int, default=2)
@click.option("--out", type=str, default="runs")
def profile(ns, ms, layers, out):
    """Emit the forward/backward/total FLOPs table as CSV, one column per configuration."""
    ns_list = tuple(int(v) for v in ns.split(","))
    ms_list = tuple(int(v) for v in ms.split(","))
    columns, reports = flops.flops_table(ns_list, ms_list, layers)
    lines = ["circuit," + ",".join(columns),
             "fw_flops," + ",".join(str(reports[c].forward) for c in columns),
             "bw_flops," + ",".join(str(reports[c].backward) for c in columns),
             "tot_flops," + ",".join(str(reports[c].total) for c in columns)]
    path = Path(out) / "flops.csv"
    write_atomic(path, "\n".join(lines) + "\n")
    click.echo("\n".join(lines))
    click.echo(f"-> {path}")


@main.command()
@click.option("--quick", is_flag=True, help="Smaller sample counts for a fast smoke check.")
@click.option("--seed", type=int, default=0)
def verify(quick, seed):
    """Run the oracle-equivalence, gradient-consistency, and zero-cut-identity suites."""
    results = verification.run_all_checks(quick=quick, seed=seed)
    for result in results:
        click.echo(result.line())
    if not all(r.passed for r in results):
        sys.exit(1)


if __name__ == "__main__":
    main()
