# Flask app for browsing VMC training runs.
# This file defines:
# - App factory + database setup
# - Read-only JSON routes over runs, training curves and measurements

from pathlib import Path

from flask import Flask, jsonify

from models import db, Run, IterationRecord, Measurement

DEFAULT_DATABASE = Path("runs") / "runs.db"


# ---------------------------------------------------------
# APP + CONFIG
# ---------------------------------------------------------

def create_app(database=DEFAULT_DATABASE):
    """
    Build the Flask app over the SQLite file `database`, creating the file and
    its tables if they don't exist yet. The CLI uses the same factory to get an
    application context for writing.
    """
    database = Path(database).resolve()
    database.parent.mkdir(parents=True, exist_ok=True)

    app = Flask(__name__)
    app.config["SQLALCHEMY_DATABASE_URI"] = f"sqlite:///{database}"
    app.config["SQLALCHEMY_TRACK_MODIFICATIONS"] = False
    db.init_app(app)

    with app.app_context():
        db.create_all()

    register_routes(app)
    return app


# ---------------------------------------------------------
# ROUTES
# ---------------------------------------------------------

def register_routes(app):

    @app.route("/runs")
    def list_runs():
        """All runs, newest first."""
        runs = Run.query.order_by(Run.created_at.desc(), Run.id.desc()).all()
        return jsonify([r.summary() for r in runs])

    @app.route("/runs/<int:run_id>")
    def show_run(run_id):
        run = db.session.get(Run, run_id)
        if run is None:
            return jsonify({"error": f"no run with id {run_id}"}), 404
        body = run.summary()
        body["n_iterations"] = len(run.iterations)
        return jsonify(body)

    @app.route("/runs/<int:run_id>/energy")
    def run_energy(run_id):
        """
        The training curve as parallel arrays, ready for plotting.
        """
        if db.session.get(Run, run_id) is None:
            return jsonify({"error": f"no run with id {run_id}"}), 404
        rows = (
            IterationRecord.query.filter_by(run_id=run_id)
            .order_by(IterationRecord.iteration)
            .all()
        )
        return jsonify({
            "iter": [r.iteration for r in rows],
            "energy_mean": [r.energy_mean for r in rows],
            "energy_stderr": [r.energy_stderr for r in rows],
            "grad_norm": [r.grad_norm for r in rows],
            "seconds": [r.seconds for r in rows],
        })

    @app.route("/runs/<int:run_id>/measurements")
    def run_measurements(run_id):
        if db.session.get(Run, run_id) is None:
            return jsonify({"error": f"no run with id {run_id}"}), 404
        rows = Measurement.query.filter_by(run_id=run_id).order_by(Measurement.id).all()
        return jsonify([m.summary() for m in rows])


# ---------------------------------------------------------
# RUN
# ---------------------------------------------------------

if __name__ == "__main__":
    # debug=True enables auto-reload; use a WSGI server for anything shared.
    create_app().run(debug=True)
