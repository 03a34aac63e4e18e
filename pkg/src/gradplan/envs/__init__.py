from .base import (
    STEP_COUNTER,
    ActionSpec,
    DatasetError,
    Episode,
    EpisodeDataset,
    collect_random_episodes,
)
from .gridworld import (
    ExactGridworldModel,
    GridMap,
    GridworldEnv,
    MapGenerationError,
    decode_grid_state,
    encode_grid_state,
    generate_map,
)
from .spaceship import PhysicsConstants, SpaceshipEnv, physics_step
from .toy import ToyEnv, sample_toy_batch, toy_reward


def make_env(name, **kwargs):
    if name == "gridworld8":
        return GridworldEnv(size=8, **kwargs)
    if name == "gridworld16":
        return GridworldEnv(size=16, **kwargs)
    if name == "spaceship":
        return SpaceshipEnv(**kwargs)
    if name == "toy":
        return ToyEnv()
    raise ValueError(f"unknown environment {name!r}")
