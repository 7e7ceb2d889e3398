from datetime import datetime
import json

from flask_sqlalchemy import SQLAlchemy

db = SQLAlchemy()

# -------------------------------------------------------------------
# RUN MODEL
# -------------------------------------------------------------------
class Run(db.Model):
    """
    One training run: what was trained, with which seed, and the final
    energy estimate. Per-iteration telemetry lives in IterationRecord.
    """

    id = db.Column(db.Integer, primary_key=True)

    # -----------------------------
    # Model and Hamiltonian
    # -----------------------------
    benchmark = db.Column(db.String(20), nullable=False)   # "tfim" or "cluster"
    seed = db.Column(db.String(20), nullable=False)   # u64 does not fit a signed SQLite integer
    n_sites = db.Column(db.Integer, nullable=False)
    n_layers = db.Column(db.Integer, nullable=False)
    hidden_size = db.Column(db.Integer, nullable=False)
    is_complex = db.Column(db.Boolean, default=False)
    config_json = db.Column(db.Text)       # resolved RunConfig
    run_dir = db.Column(db.Text)

    # -----------------------------
    # Final estimate (n_samples_eval samples)
    # -----------------------------
    final_energy = db.Column(db.Float)
    final_stderr = db.Column(db.Float)

    created_at = db.Column(db.DateTime, default=datetime.utcnow)

    iterations = db.relationship("IterationRecord", backref="run", lazy=True,
                                 order_by="IterationRecord.iteration")
    measurements = db.relationship("Measurement", backref="run", lazy=True)

    def summary(self):
        return {
            "id": self.id,
            "benchmark": self.benchmark,
            "seed": int(self.seed),
            "n_sites": self.n_sites,
            "n_layers": self.n_layers,
            "hidden_size": self.hidden_size,
            "complex": self.is_complex,
            "final_energy": self.final_energy,
            "final_stderr": self.final_stderr,
            "run_dir": self.run_dir,
            "created_at": self.created_at.isoformat() if self.created_at else None,
        }


# -------------------------------------------------------------------
# ITERATION RECORD MODEL
# -------------------------------------------------------------------
class IterationRecord(db.Model):
    """One row of the training curve."""

    id = db.Column(db.Integer, primary_key=True)
    run_id = db.Column(db.Integer, db.ForeignKey("run.id"), nullable=False)

    iteration = db.Column(db.Integer, nullable=False)
    energy_mean = db.Column(db.Float)
    energy_stderr = db.Column(db.Float)
    grad_norm = db.Column(db.Float)
    seconds = db.Column(db.Float)


# -------------------------------------------------------------------
# MEASUREMENT MODEL
# -------------------------------------------------------------------
class Measurement(db.Model):
    """Power-law fit of the correlations of a trained run."""

    id = db.Column(db.Integer, primary_key=True)
    run_id = db.Column(db.Integer, db.ForeignKey("run.id"))

    eta = db.Column(db.Float)
    eta_stderr = db.Column(db.Float)
    r2 = db.Column(db.Float)
    excluded_points = db.Column(db.Integer, default=0)
    window = db.Column(db.String(40))     # "r_min-r_max"
    checkpoint = db.Column(db.Text)

    created_at = db.Column(db.DateTime, default=datetime.utcnow)

    def summary(self):
        return {
            "id": self.id,
            "run_id": self.run_id,
            "eta": self.eta,
            "eta_stderr": self.eta_stderr,
            "R2": self.r2,
            "excluded_points": self.excluded_points,
            "window": self.window,
            "checkpoint": self.checkpoint,
        }


# -------------------------------------------------------------------
# WRITERS (need an application context)
# -------------------------------------------------------------------
def record_training_run(run_config, result, run_dir):
    """Store a finished training run and its whole RunRecord; returns the Run id."""
    final = result.final_energy
    run = Run(
        benchmark=run_config.benchmark,
        seed=str(run_config.seed),
        n_sites=run_config.n_sites,
        n_layers=run_config.depth,
        hidden_size=run_config.hidden_size,
        is_complex=run_config.complex,
        config_json=json.dumps(run_config.as_dict(), sort_keys=True),
        run_dir=str(run_dir),
        final_energy=float(final.real) if final is not None else None,
        final_stderr=result.final_stderr,
    )
    db.session.add(run)
    db.session.flush()

    db.session.add_all(
        IterationRecord(run_id=run.id, iteration=it, energy_mean=mean, energy_stderr=err,
                        grad_norm=gnorm, seconds=secs)
        for it, mean, err, gnorm, secs in result.record.rows()
    )
    db.session.commit()
    return run.id


def record_measurement(fit, checkpoint, run_id=None):
    """Store a power-law fit; run_id links it to a stored run when known."""
    measurement = Measurement(
        run_id=run_id,
        eta=fit.eta,
        eta_stderr=fit.eta_stderr,
        r2=fit.r2,
        excluded_points=fit.excluded_points,
        window=f"{fit.window[0]}-{fit.window[1]}",
        checkpoint=str(checkpoint),
    )
    db.session.add(measurement)
    db.session.commit()
    return measurement.id


def find_run(run_dir):
    """The stored run whose outputs live in run_dir, or None."""
    return Run.query.filter_by(run_dir=str(run_dir)).order_by(Run.id.desc()).first()
