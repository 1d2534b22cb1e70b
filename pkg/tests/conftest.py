from pathlib import Path

import pytest

TABLE_ROWS = """c,q,t,age,sex,education
NA,0.5865,0,56,0,3
2882.69,0.9512,0,70,1,3
2275.42,0.9149,0,71,1,3
1964.08,NA,0,61,0,3
2524.98,0.9133,0,75,1,1
2683.89,0.6261,1,50,1,3
NA,NA,0,43,1,2
1744.14,0.2123,1,21,1,3
NA,0.5122,1,28,0,3
-99,0.7000,1,40,0,2
"""


@pytest.fixture
def table_csv(tmp_path: Path) -> Path:
    path = tmp_path / "table.csv"
    path.write_text(TABLE_ROWS)
    return path


@pytest.fixture
def write_csv(tmp_path: Path):
    def _write(text: str, name: str = "data.csv") -> Path:
        path = tmp_path / name
        path.write_text(text)
        return path

    return _write
