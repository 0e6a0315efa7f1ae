import numpy as np
import pytest

from handover import pipeline, synthetic
from handover.intent import TaskDescription


@pytest.fixture(scope="session")
def right_params():
    return synthetic.synthetic_hand_params("right")


@pytest.fixture(scope="session")
def left_params():
    return synthetic.synthetic_hand_params("left")


@pytest.fixture(scope="session")
def catalog():
    return synthetic.default_catalog()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def cylinder_config():
    """A valid imagined configuration over the cylinder fixture cloud."""
    cloud = synthetic.cylinder_cloud()
    task = TaskDescription("cylinder", "right")
    return pipeline.imagine_configuration(
        task,
        cloud,
        pipeline.ProceduralPoseProvider(),
        pipeline.AntipodalGraspProvider(seed=7),
        pipeline.PipelineConfig.default(),
    )
