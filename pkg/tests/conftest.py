from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
FIX = ROOT / "src" / "hyprod" / "fixtures"
CONFIGS = ROOT / "configs"

TREE_FIXTURES = ["star_234.json", "binary_d4.json", "ternary_d3.json", "random_tree_50.json"]


def fixture_path(name: str) -> Path:
    return FIX / name


@pytest.fixture(scope="session")
def cross():
    from hyprod.product import build_product, load_product_spec
    return build_product(load_product_spec(FIX / "cross.json"))


@pytest.fixture(scope="session")
def diagonal():
    from hyprod.product import build_product, load_product_spec
    return build_product(load_product_spec(FIX / "diagonal.json"))


@pytest.fixture(scope="session")
def small_hp_product():
    from hyprod.product import build_product, load_product_spec
    return build_product(load_product_spec(FIX / "halfplane_small_product.json"))


@pytest.fixture(scope="session")
def halfplane():
    from hyprod.spaces import load_space
    return load_space(FIX / "halfplane.json")


ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def report_criterion():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""
    def record(number: int, ok: bool, detail: str):
        line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
