import pytest

from app import create_app
from config import load_run_config
from functions.observables import PowerLawFit
from functions.vmc import RunRecord
from models import find_run, record_measurement, record_training_run
from vmc_engine import TrainingResult


@pytest.fixture
def app(tmp_path):
    app = create_app(tmp_path / "runs.db")
    app.config["TESTING"] = True
    return app


@pytest.fixture
def stored_run(app, tmp_path):
    """A finished three-iteration run with one measurement, stored without training."""
    record = RunRecord()
    for t, energy in enumerate([-11.9, -12.5, -12.7]):
        record.append(t, energy, 0.1 / (t + 1), 1.0 / (t + 1), 0.5 * (t + 1))
    result = TrainingResult(params=None, state=None, record=record,
                            final_energy=complex(-12.78, 0.0), final_stderr=0.002)
    config = load_run_config(n_sites=10, seed=2**64 - 1)
    fit = PowerLawFit(eta=0.26, eta_stderr=0.01, intercept=-0.3, r2=0.99, window=(2, 5))

    with app.app_context():
        run_id = record_training_run(config, result, tmp_path / "tfim-run")
        record_measurement(fit, tmp_path / "tfim-run" / "final.dnqs", run_id)
        assert find_run(tmp_path / "tfim-run").id == run_id
        assert find_run(tmp_path / "elsewhere") is None
    return run_id


def test_list_runs(app, stored_run):
    runs = app.test_client().get("/runs").get_json()
    assert len(runs) == 1
    assert runs[0]["seed"] == 2**64 - 1
    assert runs[0]["final_energy"] == -12.78
    assert runs[0]["n_layers"] == 4


def test_run_detail_and_training_curve(app, stored_run):
    client = app.test_client()
    detail = client.get(f"/runs/{stored_run}").get_json()
    assert detail["n_iterations"] == 3
    assert detail["benchmark"] == "tfim"

    curve = client.get(f"/runs/{stored_run}/energy").get_json()
    assert curve["iter"] == [0, 1, 2]
    assert curve["energy_mean"] == [-11.9, -12.5, -12.7]
    assert len(curve["grad_norm"]) == 3


def test_measurements(app, stored_run):
    rows = app.test_client().get(f"/runs/{stored_run}/measurements").get_json()
    assert len(rows) == 1
    assert rows[0]["eta"] == 0.26
    assert rows[0]["window"] == "2-5"
    assert rows[0]["R2"] == 0.99


@pytest.mark.parametrize("url", ["/runs/99", "/runs/99/energy", "/runs/99/measurements"])
def test_unknown_run_is_404(app, url):
    response = app.test_client().get(url)
    assert response.status_code == 404
    assert "error" in response.get_json()
