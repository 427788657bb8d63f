"""
SurfR CLI - Zentraler Einstiegspunkt für Training, Rekonstruktion und Auswertung.

Verwendung:
    surfr <command> [options]

Befehle:
    train         Modell auf einem synthetischen Formenkorpus trainieren
    reconstruct   Mesh aus einer Punktwolke rekonstruieren
    eval          Zwei Meshes vergleichen (Chamfer-L2, Normalenkonsistenz)
    ablate        Ablations-Presets trainieren und vergleichen
    info          Manifest eines Checkpoints ausgeben
    sample        Synthetischen Scan und Referenz-Mesh erzeugen
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional

import typer
from loguru import logger
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from pydantic_models.config.model_config import ModelConfig, Weighting
from pydantic_models.config.reconstruction_config import ReconstructionConfig
from pydantic_models.config.training_config import NoiseLevel
from shared_modules.config import Config
from shared_modules.utils import parse_scales

app = typer.Typer(
    name="surfr",
    help="Implizite Oberflächenrekonstruktion aus Punktwolken",
    add_completion=False,
)
# Statusmeldungen auf stderr, stdout bleibt für JSON frei
console = Console(stderr=True)


def get_config(config_path: Optional[Path] = None) -> Config:
    """Lädt die Konfiguration."""
    if config_path is not None and not config_path.exists():
        console.print(f"[red]Konfigurationsdatei nicht gefunden: {config_path}[/red]")
        raise typer.Exit(1)
    Config.reset()
    try:
        return Config(config_path)
    except Exception as e:
        console.print(f"[red]Konfigurationsfehler: {e}[/red]")
        raise typer.Exit(1)


# Modellfeld -> CLI-Option
OVERRIDE_OPTIONS = {"scales": "--scales", "weighting": "--weighting", "knn_k": "--knn"}


def model_overrides(
    base: ModelConfig, scales: Optional[str], weighting: Optional[Weighting], knn: Optional[int]
) -> ModelConfig:
    """
    Übernimmt --scales, --weighting und --knn in die Modellkonfiguration (mit Validierung).

    Raises:
        typer.BadParameter: Bei ungültiger Skalenliste oder ungültigem Wert, mit der passenden Option (Exit-Code 2).
    """
    updates: Dict[str, Any] = {}
    try:
        parsed = parse_scales(scales)
    except ValueError as e:
        raise typer.BadParameter(str(e), param_hint="--scales") from None
    if parsed is not None:
        updates["scales"] = parsed
    if weighting is not None:
        updates["weighting"] = weighting
    if knn is not None:
        updates["knn_k"] = knn
    if not updates:
        return base
    try:
        return ModelConfig.model_validate({**base.model_dump(), **updates})
    except ValidationError as e:
        failed = {str(err["loc"][0]) for err in e.errors() if err["loc"]}
        hints = [OVERRIDE_OPTIONS[field] for field in updates if field in failed]
        raise typer.BadParameter(str(e), param_hint=hints or [OVERRIDE_OPTIONS[field] for field in updates]) from None


def emit_json(payload: Dict[str, Any], report_path: Optional[Path]) -> None:
    """JSON auf stdout und optional in eine Datei."""
    text = json.dumps(payload, indent=2, sort_keys=True)
    if report_path is not None:
        report_path.parent.mkdir(parents=True, exist_ok=True)
        report_path.write_text(text + "\n", encoding="utf-8")
    typer.echo(text)


ConfigOption = typer.Option(
    None,
    "--config",
    "-c",
    help="Pfad zur Konfigurationsdatei (Standard: .config/surfr_config.yaml)",
)
ScalesOption = typer.Option(None, "--scales", help="Skalenliste, z.B. '1,4,16'")
WeightingOption = typer.Option(None, "--weighting", case_sensitive=False, help="Nachbargewichtung")
KnnOption = typer.Option(None, "--knn", min=1, help="Anzahl nächster Nachbarn pro Zelle")


@app.command("train")
def train_command(
    config_path: Optional[Path] = ConfigOption,
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="Checkpoint zum Weitertrainieren"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Zielverzeichnis für die Verlustkurve"),
    checkpoint_dir: Optional[Path] = typer.Option(None, "--checkpoint-dir", help="Zielverzeichnis für Checkpoints"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed für Korpus, Sampling und Initialisierung"),
    epochs: Optional[int] = typer.Option(None, "--epochs", min=1, help="Anzahl Epochen"),
    shapes: Optional[int] = typer.Option(None, "--shapes", min=1, help="Anzahl Formen im Korpus"),
    noise: Optional[NoiseLevel] = typer.Option(None, "--noise", case_sensitive=False, help="Rauschstufe der Scans"),
    scales: Optional[str] = ScalesOption,
    weighting: Optional[Weighting] = WeightingOption,
    knn: Optional[int] = KnnOption,
) -> None:
    """
    Trainiert ein Modell auf einem synthetischen Formenkorpus.

    Schreibt die Verlustkurve als CSV und Checkpoints im konfigurierten Intervall.
    """
    config = get_config(config_path)
    model_config = model_overrides(config.model, scales, weighting, knn)
    console.print("[bold blue]Starte Training...[/bold blue]")

    try:
        from training.modules.checkpoint import load_checkpoint
        from training.modules.shapes import shape_corpus
        from training.modules.trainer import Trainer

        updates: Dict[str, Any] = {}
        if seed is not None:
            updates["seed"] = seed
        if shapes is not None:
            updates["num_shapes"] = shapes
        if noise is not None:
            updates["noise"] = noise
        training = config.training.model_copy(update=updates)
        corpus = shape_corpus(training.num_shapes, training.seed)

        model = optimizer = None
        start_epoch = 0
        if checkpoint is not None:
            model, manifest, optimizer = load_checkpoint(checkpoint, model_config)
            start_epoch = manifest.epoch
            console.print(f"[blue]Setze Training ab Epoche {start_epoch} fort.[/blue]")

        trainer = Trainer(
            model_config,
            training,
            config.loss,
            output or config.get_output_path() / "train",
            checkpoint_dir or config.get_checkpoint_path(),
            model=model,
            optimizer=optimizer,
            start_epoch=start_epoch,
        )
        result = trainer.fit(corpus, epochs)

        logger.success(f"Training abgeschlossen, Checkpoint: {result.checkpoint}")
        console.print(f"[bold green]Training abgeschlossen. Checkpoint: {result.checkpoint}[/bold green]")
    except Exception as e:
        logger.exception(f"Fehler beim Training: {e}")
        console.print(f"[red]Fehler: {e}[/red]")
        raise typer.Exit(1)


@app.command("reconstruct")
def reconstruct_command(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Trainierter Checkpoint"),
    input_path: Path = typer.Option(..., "--input", "-i", help="Punktwolke (.xyz oder .ply)"),
    output: Path = typer.Option(..., "--output", "-o", help="Ziel-Mesh (.obj oder .ply)"),
    config_path: Optional[Path] = ConfigOption,
    resolution: Optional[int] = typer.Option(None, "--resolution", "-r", min=2, help="Voxel pro Achse"),
    box_filter: Optional[int] = typer.Option(None, "--box-filter", min=3, help="Kantenlänge ε des Boxfilters"),
    update_threshold: Optional[int] = typer.Option(None, "--update-threshold", min=0, help="Schwellwert t_update"),
    radius: Optional[int] = typer.Option(None, "--radius", min=0, help="Dilatationsradius um belegte Voxel"),
    report: Optional[Path] = typer.Option(None, "--report", help="Zusätzliche JSON-Datei mit dem Zeitbericht"),
    scales: Optional[str] = ScalesOption,
    weighting: Optional[Weighting] = WeightingOption,
    knn: Optional[int] = KnnOption,
) -> None:
    """
    Rekonstruiert ein Mesh aus einer Punktwolke.

    Ohne --config und ohne Modell-Flags gilt die Modellkonfiguration des Checkpoints;
    sonst muss sie mit dem Checkpoint übereinstimmen.
    """
    config = get_config(config_path)
    explicit = config_path is not None or any(v is not None for v in (scales, weighting, knn))
    expected = model_overrides(config.model, scales, weighting, knn) if explicit else None
    console.print(f"[bold blue]Rekonstruiere {input_path.name}...[/bold blue]")

    try:
        from geometry.modules.point_io import read_point_cloud
        from reconstruction.modules.mesh_io import write_mesh
        from reconstruction.modules.pipeline import reconstruct
        from training.modules.checkpoint import load_checkpoint

        updates: Dict[str, Any] = {}
        if resolution is not None:
            updates["resolution"] = resolution
        if box_filter is not None:
            updates["box_filter_size"] = box_filter
        if update_threshold is not None:
            updates["update_threshold"] = update_threshold
        if radius is not None:
            updates["near_surface_radius"] = radius
        settings = ReconstructionConfig.model_validate({**config.reconstruction.model_dump(), **updates})

        model, _, _ = load_checkpoint(checkpoint, expected)
        cloud = read_point_cloud(input_path)
        result = reconstruct(model, cloud, settings)
        write_mesh(result.mesh, output)

        payload = {"input": str(input_path), "output": str(output), **result.report()}
        emit_json(payload, report)
        logger.success(f"Mesh nach {output} geschrieben.")
    except Exception as e:
        logger.exception(f"Fehler bei der Rekonstruktion: {e}")
        console.print(f"[red]Fehler: {e}[/red]")
        raise typer.Exit(1)


@app.command("eval")
def eval_command(
    input_path: Path = typer.Option(..., "--input", "-i", help="Rekonstruiertes Mesh (.obj oder .ply)"),
    reference: Path = typer.Option(..., "--reference", help="Referenz-Mesh (.obj oder .ply)"),
    config_path: Optional[Path] = ConfigOption,
    samples: Optional[int] = typer.Option(None, "--samples", min=1, help="Abtastpunkte pro Mesh"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed für die Oberflächenpunkte"),
    report: Optional[Path] = typer.Option(None, "--report", help="Zusätzliche JSON-Datei für den Report"),
) -> None:
    """
    Vergleicht zwei Meshes und gibt Chamfer-L2 (×100) und Normalenkonsistenz als JSON aus.
    """
    config = get_config(config_path)

    try:
        from evaluation.modules.metrics import evaluate_meshes
        from reconstruction.modules.mesh_io import read_mesh

        predicted = read_mesh(input_path)
        target = read_mesh(reference)
        metrics = evaluate_meshes(
            predicted,
            target,
            samples or config.evaluation.num_samples,
            seed if seed is not None else config.evaluation.seed,
            workers=config.get_thread_count(),
        )
        emit_json(metrics.model_dump(mode="json"), report)
        if not metrics.ok:
            console.print(f"[yellow]Auswertung ohne Ergebnis: {metrics.failure}[/yellow]")
        logger.success("Auswertung abgeschlossen.")
    except Exception as e:
        logger.exception(f"Fehler bei der Auswertung: {e}")
        console.print(f"[red]Fehler: {e}[/red]")
        raise typer.Exit(1)


@app.command("ablate")
def ablate_command(
    config_path: Optional[Path] = ConfigOption,
    presets: Optional[str] = typer.Option(None, "--presets", help="Kommagetrennte Presets (Standard: alle)"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Zielverzeichnis für die Tabellen"),
    shapes: Optional[int] = typer.Option(None, "--shapes", min=1, help="Anzahl Formen im Korpus"),
    epochs: Optional[int] = typer.Option(None, "--epochs", min=1, help="Epochen pro Preset"),
    resolution: Optional[int] = typer.Option(None, "--resolution", "-r", min=2, help="Voxel pro Achse"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed für Korpus und Training"),
    noise: Optional[NoiseLevel] = typer.Option(None, "--noise", case_sensitive=False, help="Rauschstufe der Scans"),
    knn: Optional[int] = KnnOption,
) -> None:
    """
    Trainiert pro Preset ein Modell und schreibt eine Tabelle (eine Zeile pro Preset) als CSV.
    """
    config = get_config(config_path)
    names: List[str] = [p.strip() for p in presets.split(",") if p.strip()] if presets else []

    try:
        from evaluation.modules.ablation import resolve_presets, run_ablation
        from training.modules.shapes import shape_corpus

        selected = resolve_presets(names)
        data = config.get_data()
        training_updates: Dict[str, Any] = {}
        if shapes is not None:
            training_updates["num_shapes"] = shapes
        if epochs is not None:
            training_updates["epochs"] = epochs
        if seed is not None:
            training_updates["seed"] = seed
        if noise is not None:
            training_updates["noise"] = noise
        data = data.model_copy(
            update={
                "training": data.training.model_copy(update=training_updates),
                "reconstruction": data.reconstruction.model_copy(
                    update={"resolution": resolution} if resolution is not None else {}
                ),
                "model": model_overrides(data.model, None, None, knn),
            }
        )
        corpus = shape_corpus(data.training.num_shapes, data.training.seed)
        console.print(f"[bold blue]Ablation: {len(selected)} Presets, {len(corpus)} Formen...[/bold blue]")
        table = run_ablation(
            data, corpus, selected, output or config.get_output_path() / "ablation", workers=config.get_thread_count()
        )

        view = Table(title="Ablation")
        for column in table.columns:
            view.add_column(str(column))
        for row in table.itertuples(index=False):
            view.add_row(*[str(v) for v in row])
        console.print(view)
        console.print("[bold green]Ablation abgeschlossen.[/bold green]")
    except Exception as e:
        logger.exception(f"Fehler bei der Ablation: {e}")
        console.print(f"[red]Fehler: {e}[/red]")
        raise typer.Exit(1)


@app.command("info")
def info_command(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Checkpoint-Datei"),
    tensors: bool = typer.Option(False, "--tensors", help="Auch die Einträge aller Arrays ausgeben"),
) -> None:
    """
    Gibt das Manifest eines Checkpoints als JSON aus.
    """
    try:
        from training.modules.checkpoint import read_manifest

        manifest = read_manifest(checkpoint)
        payload = manifest.model_dump(mode="json")
        if not tensors:
            payload["tensors"] = len(manifest.tensors)
        emit_json(payload, None)
    except Exception as e:
        logger.exception(f"Checkpoint konnte nicht gelesen werden: {e}")
        console.print(f"[red]Fehler: {e}[/red]")
        raise typer.Exit(1)


@app.command("sample")
def sample_command(
    output: Path = typer.Option(..., "--output", "-o", help="Ziel für den Scan (.xyz oder .ply)"),
    reference: Optional[Path] = typer.Option(None, "--reference", help="Ziel für das Referenz-Mesh (.obj oder .ply)"),
    kind: Optional[str] = typer.Option(None, "--kind", help="sphere, box, torus, union oder difference"),
    config_path: Optional[Path] = ConfigOption,
    points: Optional[int] = typer.Option(None, "--points", min=1, help="Anzahl Scanpunkte"),
    noise: Optional[NoiseLevel] = typer.Option(None, "--noise", case_sensitive=False, help="Rauschstufe"),
    seed: int = typer.Option(0, "--seed", help="Seed für Form und Scan"),
) -> None:
    """
    Erzeugt einen simulierten Scan einer synthetischen Form und optional deren Referenz-Mesh.
    """
    config = get_config(config_path)
    from training.modules.shapes import SHAPE_KINDS

    if kind is not None and kind not in SHAPE_KINDS:
        allowed = ", ".join(SHAPE_KINDS)
        raise typer.BadParameter(f"Unbekannte Formart: {kind} (erlaubt: {allowed})", param_hint="--kind")

    try:
        import numpy as np

        from geometry.modules.point_io import write_point_cloud
        from reconstruction.modules.mesh_io import write_mesh
        from training.modules.sampling import sample_scan
        from training.modules.shapes import random_shape, reference_mesh

        shape = random_shape(np.random.default_rng(seed), kind)
        level = noise or config.training.noise
        cloud = sample_scan(shape, points or config.training.num_input_points, level.sigma, seed)
        output.parent.mkdir(parents=True, exist_ok=True)
        write_point_cloud(cloud, output)
        if reference is not None:
            write_mesh(reference_mesh(shape, config.evaluation.reference_resolution), reference)
        logger.success(f"Scan einer Form '{shape.kind}' nach {output} geschrieben.")
        console.print(f"[bold green]{len(cloud)} Punkte ({shape.kind}) nach {output} geschrieben.[/bold green]")
    except Exception as e:
        logger.exception(f"Fehler beim Erzeugen des Scans: {e}")
        console.print(f"[red]Fehler: {e}[/red]")
        raise typer.Exit(1)


def main() -> None:
    """Haupteinstiegspunkt für die CLI."""
    app()


if __name__ == "__main__":
    main()
