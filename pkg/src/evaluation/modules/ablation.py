"""
Ablations-Harness: trainiert pro Preset ein Modell auf dem Korpus, rekonstruiert jede Form und
vergleicht mit dem Referenz-Mesh. Ergebnis als Tabelle (eine Zeile pro Preset).
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel

from pydantic_models.config.config_data import ConfigData
from pydantic_models.config.model_config import ModelConfig, Weighting
from reconstruction.modules.pipeline import reconstruct
from shared_modules.utils import ensure_dir
from training.modules.sampling import sample_scan
from training.modules.shapes import reference_mesh
from training.modules.trainer import Trainer

from .metrics import evaluate_meshes


class AblationPreset(BaseModel):
    name: str
    scales: List[int]
    weighting: Weighting = Weighting.INTERP_NN
    use_attention: bool = True

    def apply(self, base: ModelConfig) -> ModelConfig:
        return ModelConfig.model_validate(
            {
                **base.model_dump(),
                "scales": self.scales,
                "weighting": self.weighting,
                "use_attention": self.use_attention,
            }
        )


ABLATION_PRESETS: Dict[str, AblationPreset] = {
    p.name: p
    for p in [
        AblationPreset(name="base", scales=[1], use_attention=False),
        AblationPreset(name="multiscale", scales=[1, 4, 16], use_attention=False),
        AblationPreset(name="multiscale_attention", scales=[1, 4, 16]),
        AblationPreset(name="interpnn_1_4", scales=[1, 4]),
        AblationPreset(name="interpnn_1_4_16", scales=[1, 4, 16]),
        AblationPreset(name="interpnn_1_5_25", scales=[1, 5, 25]),
        AblationPreset(name="interpnn_1_3_9_27", scales=[1, 3, 9, 27]),
        AblationPreset(name="lw_1_4_16", scales=[1, 4, 16], weighting=Weighting.LEARNED_WEIGHT),
        AblationPreset(name="ew_1_4_16", scales=[1, 4, 16], weighting=Weighting.EQUAL_WEIGHT),
    ]
}

SUMMARY_COLUMNS = [
    "preset",
    "scales",
    "weighting",
    "attention",
    "shapes",
    "failures",
    "chamfer_l2_x100",
    "normal_consistency",
    "reconstruct_seconds",
]


def resolve_presets(names: Optional[Sequence[str]]) -> List[AblationPreset]:
    if not names:
        return list(ABLATION_PRESETS.values())
    unknown = [n for n in names if n not in ABLATION_PRESETS]
    if unknown:
        raise ValueError(f"Unbekannte Presets: {', '.join(unknown)} (verfügbar: {', '.join(ABLATION_PRESETS)})")
    return [ABLATION_PRESETS[n] for n in names]


def run_ablation(
    config: ConfigData,
    shapes: Sequence,
    presets: Sequence[AblationPreset],
    output_dir: Path,
    eval_shapes: Optional[Sequence] = None,
    workers: int = 1,
) -> pd.DataFrame:
    """
    Args:
        config (ConfigData): Basiskonfiguration; die Presets überschreiben Skalen, Gewichtung und Attention.
        shapes (Sequence): Trainingskorpus.
        presets (Sequence[AblationPreset]): Auszuführende Presets.
        output_dir (Path): Ziel für ablation_summary.csv und ablation_details.csv.
        eval_shapes (Sequence, optional): Auswertungsformen; ohne Angabe der Trainingskorpus.

    Returns:
        pd.DataFrame: Eine Zeile pro Preset.
    """
    out = ensure_dir(output_dir)
    targets = list(eval_shapes) if eval_shapes is not None else list(shapes)
    references = [reference_mesh(s, config.evaluation.reference_resolution) for s in targets]
    details: List[Dict[str, Any]] = []
    summary: List[Dict[str, Any]] = []
    for preset in presets:
        model_config = preset.apply(config.model)
        logger.info(f"Ablation '{preset.name}': Skalen {preset.scales}, {preset.weighting.value}.")
        trainer = Trainer(model_config, config.training, config.loss, out / preset.name)
        model = trainer.fit(shapes).model
        rows: List[Dict[str, Any]] = []
        for i, (shape, ref) in enumerate(zip(targets, references)):
            cloud = sample_scan(shape, config.training.num_input_points, config.training.noise.sigma, seed=10_000 + i)
            result = reconstruct(model, cloud, config.reconstruction)
            report = evaluate_meshes(
                result.mesh, ref, config.evaluation.num_samples, config.evaluation.seed, result.timings, workers
            )
            rows.append(
                {
                    "preset": preset.name,
                    "shape": i,
                    "kind": shape.kind,
                    "chamfer_l2_x100": report.chamfer_l2_x100,
                    "normal_consistency": report.normal_consistency,
                    "reconstruct_seconds": result.timings.get("total", 0.0),
                    "failure": report.failure,
                }
            )
        details.extend(rows)
        ok = [r for r in rows if r["failure"] is None]
        summary.append(
            {
                "preset": preset.name,
                "scales": " ".join(str(s) for s in preset.scales),
                "weighting": preset.weighting.value,
                "attention": preset.use_attention,
                "shapes": len(rows),
                "failures": len(rows) - len(ok),
                "chamfer_l2_x100": float(np.mean([r["chamfer_l2_x100"] for r in ok])) if ok else None,
                "normal_consistency": float(np.mean([r["normal_consistency"] for r in ok])) if ok else None,
                "reconstruct_seconds": float(np.mean([r["reconstruct_seconds"] for r in rows])),
            }
        )
    table = pd.DataFrame(summary, columns=SUMMARY_COLUMNS)
    table.to_csv(out / "ablation_summary.csv", index=False)
    pd.DataFrame(details).to_csv(out / "ablation_details.csv", index=False)
    logger.success(f"Ablation mit {len(presets)} Presets abgeschlossen: {out / 'ablation_summary.csv'}")
    return table
