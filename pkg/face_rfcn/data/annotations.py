"""
WIDER-style plain-text annotations.

Each record is an image path line, a box count line and ``count`` lines starting with
``x y w h`` (further fields are ignored). A record with count 0 may be followed by one
placeholder box line.
"""
from pathlib import Path
from typing import List, Sequence, Tuple, Union

from loguru import logger

from ..errors import AnnotationParseError, MissingArtifactError
from ..models import Box
from ..utils.helpers import format_number

AnnotationRecord = Tuple[str, List[Box]]


def _parse_box(line: str, line_no: int) -> Box:
    tokens = line.split()
    if len(tokens) < 4:
        raise AnnotationParseError(f"expected 'x y w h', got '{line}'", line_no)
    try:
        x, y, w, h = (float(t) for t in tokens[:4])
    except ValueError:
        raise AnnotationParseError(f"non-numeric box '{line}'", line_no) from None
    if w < 0 or h < 0:
        raise AnnotationParseError(f"negative box size in '{line}'", line_no)
    try:
        return Box.from_xywh(x, y, w, h)
    except ValueError as e:
        raise AnnotationParseError(f"invalid box '{line}': {e}", line_no) from None


def _is_placeholder(line: str) -> bool:
    tokens = line.split()
    if len(tokens) < 4:
        return False
    try:
        [float(t) for t in tokens[:4]]
    except ValueError:
        return False
    return True


def parse_annotations(text: str) -> List[AnnotationRecord]:
    lines = text.splitlines()
    records: List[AnnotationRecord] = []
    i = 0
    while i < len(lines):
        path = lines[i].strip()
        if not path:
            i += 1
            continue
        if i + 1 >= len(lines):
            raise AnnotationParseError(f"missing box count after '{path}'", i + 1)

        count_line = lines[i + 1].strip()
        try:
            count = int(count_line)
        except ValueError:
            raise AnnotationParseError(f"malformed box count '{count_line}'", i + 2) from None
        if count < 0:
            raise AnnotationParseError(f"negative box count {count}", i + 2)
        i += 2

        boxes = []
        for _ in range(count):
            if i >= len(lines):
                raise AnnotationParseError(f"expected {count} boxes for '{path}'", i + 1)
            boxes.append(_parse_box(lines[i].strip(), i + 1))
            i += 1
        if count == 0 and i < len(lines) and _is_placeholder(lines[i]):
            i += 1
        records.append((path, boxes))
    return records


def load_annotations(list_path: Union[str, Path]) -> List[AnnotationRecord]:
    """
    Read an annotation file into (image path, boxes) records.

    Raises:
        MissingArtifactError: the file does not exist
        AnnotationParseError: malformed count or box line, with its line number
    """
    list_path = Path(list_path)
    if not list_path.is_file():
        raise MissingArtifactError(f"Annotation file not found: {list_path}")
    records = parse_annotations(list_path.read_text(encoding="utf-8"))
    logger.debug(f"Loaded {len(records)} annotation records from {list_path}")
    return records


def render_annotations(records: Sequence[AnnotationRecord]) -> str:
    out = []
    for path, boxes in records:
        out.append(path)
        out.append(str(len(boxes)))
        for box in boxes:
            out.append(
                " ".join(format_number(v) for v in (box.x1, box.y1, box.width, box.height))
            )
        if not boxes:
            out.append("0 0 0 0")
    return "".join(line + "\n" for line in out)


def write_annotations(records: Sequence[AnnotationRecord], path: Union[str, Path]) -> None:
    """Write records in the format load_annotations reads; zero-box records get a placeholder."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_annotations(records), encoding="utf-8")
