import pytest

pytest.importorskip("figplots", reason="plotting package not installed")
