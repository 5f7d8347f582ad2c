"""Line-delimited file formats for proposals, ground truth, and run reports.

Proposal and ground-truth files are JSON Lines: a header object on the first
line followed by one record per line.  Numbers are serialized with Python's
shortest round-trip float encoding, so write-then-read reproduces every value
bit for bit.  Reports are single canonical JSON documents (sorted keys, fixed
separators, trailing newline), which makes equal runs byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path
from typing import Any

import numpy as np

from .geometry import Box, Mask
from .pipeline import PipelineConfig, PipelineDiagnostics, RefinedProposal
from .proposals import GroundTruth, Proposal, ProposalSet

FORMAT_VERSION = 1
PROPOSALS_FORMAT = "proposals"
GROUND_TRUTH_FORMAT = "ground-truth"
RUN_REPORT_FORMAT = "run-report"


class ProposalFileError(ValueError):
    """Parse failure carrying the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _dump_line(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def dumps_canonical(obj: Any) -> str:
    """Deterministic JSON document: sorted keys, compact, trailing newline."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def _mask_to_record(mask: Mask) -> dict:
    return {
        "width": mask.width,
        "height": mask.height,
        "values": [float(v) for v in mask.values.ravel()],
    }


def _mask_from_record(rec: dict) -> Mask:
    values = np.array(rec["values"], dtype=np.float64).reshape(
        int(rec["height"]), int(rec["width"])
    )
    return Mask(values)


def proposal_set_to_lines(pset: ProposalSet) -> list[str]:
    header = {
        "format": PROPOSALS_FORMAT,
        "version": FORMAT_VERSION,
        "image_width": pset.image_width,
        "image_height": pset.image_height,
        "feature_dim": pset.feature_dim,
    }
    lines = [_dump_line(header)]
    for p in pset:
        rec: dict[str, Any] = {
            "id": p.id,
            "score": p.score,
            "box": [p.box.x1, p.box.y1, p.box.x2, p.box.y2],
            "feature": [float(v) for v in p.feature],
        }
        if p.mask is not None:
            rec["mask"] = _mask_to_record(p.mask)
        lines.append(_dump_line(rec))
    return lines


def write_proposal_file(path: str | Path, pset: ProposalSet) -> None:
    Path(path).write_text("\n".join(proposal_set_to_lines(pset)) + "\n")


def read_proposal_file(path: str | Path) -> ProposalSet:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise ProposalFileError(1, "empty file, expected a header object")
    header = _parse_line(lines[0], 1)
    if header.get("format") != PROPOSALS_FORMAT:
        raise ProposalFileError(1, f"expected format {PROPOSALS_FORMAT!r}")
    if header.get("version") != FORMAT_VERSION:
        raise ProposalFileError(1, f"unsupported version {header.get('version')!r}")
    try:
        image_width = float(header["image_width"])
        image_height = float(header["image_height"])
        feature_dim = int(header["feature_dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProposalFileError(1, f"malformed header: {exc}") from exc
    proposals = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        rec = _parse_line(line, line_no)
        try:
            box = Box(*(float(v) for v in rec["box"]))
            mask = _mask_from_record(rec["mask"]) if "mask" in rec else None
            proposals.append(
                Proposal(
                    id=int(rec["id"]),
                    score=float(rec["score"]),
                    box=box,
                    feature=np.array(rec["feature"], dtype=np.float64),
                    mask=mask,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProposalFileError(line_no, f"malformed proposal record: {exc}") from exc
    return ProposalSet(
        proposals=tuple(proposals),
        image_width=image_width,
        image_height=image_height,
        feature_dim=feature_dim,
    )


def _parse_line(line: str, line_no: int) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProposalFileError(line_no, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ProposalFileError(line_no, "expected a JSON object")
    return obj


def write_ground_truth(path: str | Path, gt: GroundTruth) -> None:
    header = {"format": GROUND_TRUTH_FORMAT, "version": FORMAT_VERSION}
    lines = [_dump_line(header)]
    for box, label in zip(gt.boxes, gt.labels):
        lines.append(
            _dump_line({"box": [box.x1, box.y1, box.x2, box.y2], "label": label})
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_ground_truth(path: str | Path) -> GroundTruth:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ProposalFileError(1, "empty file, expected a header object")
    header = _parse_line(lines[0], 1)
    if header.get("format") != GROUND_TRUTH_FORMAT:
        raise ProposalFileError(1, f"expected format {GROUND_TRUTH_FORMAT!r}")
    boxes = []
    labels = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        rec = _parse_line(line, line_no)
        try:
            boxes.append(Box(*(float(v) for v in rec["box"])))
            labels.append(int(rec.get("label", 0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ProposalFileError(line_no, f"malformed region record: {exc}") from exc
    return GroundTruth(boxes=tuple(boxes), labels=tuple(labels))


def _refined_to_record(r: RefinedProposal) -> dict:
    rec: dict[str, Any] = {
        "box": [r.box.x1, r.box.y1, r.box.x2, r.box.y2],
        "score": r.score,
        "feature": [float(v) for v in r.feature],
        "source_weights": [float(v) for v in r.source_weights],
    }
    if r.probability is not None:
        rec["probability"] = r.probability
    if r.mask is not None:
        rec["mask"] = _mask_to_record(r.mask)
    return rec


def run_report(
    cfg: PipelineConfig,
    refined: list[RefinedProposal],
    diagnostics: PipelineDiagnostics,
) -> dict:
    """Deterministic report payload: config echo, outputs, diagnostics.

    Wall-clock measurements deliberately stay out of the payload so that
    identical inputs produce byte-identical reports; timing belongs on
    stderr.
    """
    return {
        "format": RUN_REPORT_FORMAT,
        "version": FORMAT_VERSION,
        "config": asdict(cfg),
        "refined": [_refined_to_record(r) for r in refined],
        "diagnostics": {
            "k": diagnostics.k,
            "kappa": diagnostics.kappa,
            "rate_bound": diagnostics.rate_bound,
            "marginal_violations": list(diagnostics.marginal_violations),
            "sinkhorn_iterations": diagnostics.sinkhorn_iterations,
            "log_domain": diagnostics.log_domain,
            "fw_iterations": diagnostics.fw_iterations,
            "fw_objective": list(diagnostics.fw_objective),
        },
    }


def write_run_report(path: str | Path, report: dict) -> None:
    Path(path).write_text(dumps_canonical(report))


def read_run_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
