from __future__ import annotations

from pathlib import Path

import pytest

from stratac import ontology as onto_mod
from stratac.frames import SituationModel

PACK_DIR = Path(__file__).resolve().parent.parent / "src" / "stratac" / "data" / "packs"
WORLD_DIR = Path(__file__).resolve().parent.parent / "src" / "stratac" / "data" / "worlds"


@pytest.fixture(scope="session")
def ship_knowledge():
    return onto_mod.load([PACK_DIR / "base.kp", PACK_DIR / "ship.kp"])


@pytest.fixture(scope="session")
def team_knowledge():
    return onto_mod.load([PACK_DIR / "base.kp", PACK_DIR / "team-leader.kp",
                          PACK_DIR / "team-member.kp"])


@pytest.fixture
def ship_situation(ship_knowledge):
    onto, _ = ship_knowledge
    return SituationModel(onto)
