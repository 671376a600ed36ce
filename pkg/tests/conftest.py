import pytest

from artishape.shape_io import write_pbm
from artishape.synthetic import articulated_dataset

ACCEPTANCE_LINES: list[str] = []


def write_manifest(root, masks, labels=True):
    root.mkdir(parents=True, exist_ok=True)
    rows = ["path,id,category"]
    for m in masks:
        write_pbm(m.grid, root / f"{m.id}.pbm")
        rows.append(f"{m.id}.pbm,{m.id},{m.category if labels else ''}")
    path = root / "manifest.csv"
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture(scope="session")
def small_masks():
    """Eight small articulated shapes, two per category; quick to process."""
    return articulated_dataset(7, per_category=2, width=5.0, arm=9.0)


@pytest.fixture
def small_manifest(tmp_path, small_masks):
    return write_manifest(tmp_path / "data", small_masks)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

