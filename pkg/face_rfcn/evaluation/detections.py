"""Detection text files: one ``image_id x1 y1 x2 y2 score`` line per detection."""
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Union

from pydantic import ValidationError

from ..errors import EvaluationInputError, MissingArtifactError
from ..models import Box, Detection
from ..ops.geometry import descending_order
from ..utils.helpers import format_number


def render_detections(detections: Mapping[str, Sequence[Detection]]) -> str:
    """Lines ordered by image id, then descending score."""
    lines = []
    for image_id in sorted(detections):
        dets = list(detections[image_id])
        for i in descending_order([d.score for d in dets]):
            det = dets[i]
            values = " ".join(format_number(v) for v in (*det.box.as_tuple(), det.score))
            lines.append(f"{image_id} {values}")
    return "".join(line + "\n" for line in lines)


def write_detections(detections: Mapping[str, Sequence[Detection]], path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_detections(detections), encoding="utf-8")


def parse_detections(text: str) -> Dict[str, List[Detection]]:
    detections: Dict[str, List[Detection]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 6:
            raise EvaluationInputError(f"line {line_no}: expected 'image_id x1 y1 x2 y2 score'")
        try:
            x1, y1, x2, y2, score = (float(t) for t in tokens[1:])
            det = Detection(box=Box(x1=x1, y1=y1, x2=x2, y2=y2), score=score)
        except (ValueError, ValidationError) as e:
            raise EvaluationInputError(f"line {line_no}: malformed detection: {e}") from None
        detections.setdefault(tokens[0], []).append(det)
    return detections


def read_detections(path: Union[str, Path]) -> Dict[str, List[Detection]]:
    """
    Raises:
        MissingArtifactError: the file does not exist
        EvaluationInputError: a malformed line
    """
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"Detections file not found: {path}")
    return parse_detections(path.read_text(encoding="utf-8"))
