import pytest

from flowagg.db import database
from flowagg.harness import collect_ids_samples, collect_svm_samples
from flowagg.ml import svm
from flowagg.ml.ids import som_train
from flowagg.models.schemas import ExperimentConfig, SvmModel

from .helpers import Fabric, cluster_samples


@pytest.fixture
def fabric():
    return Fabric()


@pytest.fixture
def hand_model():
    # -1 iff f + 0.5 * delta_f >= 210 on a 300-entry table
    return SvmModel(w1=-1.0, w2=-0.5, b=0.7, scale1=300.0, scale2=300.0, f_cap=300)


@pytest.fixture(scope="session")
def small_grid():
    return som_train(cluster_samples(), grid_size=4, epochs=60, seed=1)


@pytest.fixture(scope="session")
def trained_model():
    """SVM fitted on the in-simulator training runs."""
    base = ExperimentConfig.model_validate({"name": "svm-training", "seed": 7, "analyzer": {"mode": "FMS_only"}})
    return svm.train(collect_svm_samples(base), f_cap=base.analyzer.f_cap)


@pytest.fixture(scope="session")
def trained_grid():
    base = ExperimentConfig.model_validate({"name": "ids-training", "seed": 7, "analyzer": {"mode": "FMS_only"}})
    return som_train(collect_ids_samples(base), seed=1)


@pytest.fixture
def base_config():
    def build(mode="FMS_only", rate=30.0, duration=60.0, seed=7, **extra):
        data = {
            "name": f"{mode}-R{rate:g}",
            "seed": seed,
            "duration": duration,
            "analyzer": {"mode": mode, **extra.pop("analyzer", {})},
            "traffic": {"rate": rate},
            **extra,
        }
        return ExperimentConfig.model_validate(data)
    return build


@pytest.fixture
def clean_sessions():
    database.sessions_db.clear()
    database.session_id_counter = 1
    yield
    database.sessions_db.clear()
    database.session_id_counter = 1
