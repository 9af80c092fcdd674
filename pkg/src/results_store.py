"""
Optional SQL archive of experiment summaries
"""

from datetime import datetime

import pandas as pd
from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, create_engine
from sqlalchemy.orm import declarative_base, relationship, sessionmaker

Base = declarative_base()

LABEL_COLUMNS = ('policy', 'family')
KEY_COLUMNS = ('seed', 't')


class ExperimentRun(Base):
    """One CLI invocation"""
    __tablename__ = 'experiment_runs'

    id = Column(Integer, primary_key=True)
    kind = Column(String(20), nullable=False)
    config_digest = Column(String(64), nullable=False)
    kernel = Column(String(50))
    num_arms = Column(Integer)
    horizon = Column(Integer, nullable=False)
    num_seeds = Column(Integer, nullable=False)
    created_at = Column(DateTime, default=datetime.utcnow, nullable=False)

    summaries = relationship("RunSummary", back_populates="run", cascade="all, delete-orphan")


class RunSummary(Base):
    """One metric of one (policy or bound family, seed, checkpoint)"""
    __tablename__ = 'run_summaries'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('experiment_runs.id'), nullable=False)
    label = Column(String(100), nullable=False)
    seed = Column(Integer, nullable=False)
    t = Column(Integer)
    metric = Column(String(50), nullable=False)
    value = Column(Float)

    run = relationship("ExperimentRun", back_populates="summaries")


def create_database(url):
    """Create all tables at a SQLAlchemy URL and return the engine"""
    engine = create_engine(url)
    Base.metadata.create_all(engine)
    return engine


def get_session(url):
    """Session bound to a database whose tables exist"""
    Session = sessionmaker(bind=create_database(url))
    return Session()


def archive_result(url, config, result):
    """
    Store a result's summary table in long form

    Returns:
        id of the new ExperimentRun
    """
    session = get_session(url)
    try:
        run = ExperimentRun(
            kind=result.kind,
            config_digest=config.digest,
            kernel=config.environment.kernel.label,
            num_arms=len(config.environment.points),
            horizon=config.horizon,
            num_seeds=len(config.seeds),
        )
        session.add(run)

        summary = result.summary
        label_column = next((c for c in LABEL_COLUMNS if c in summary.columns), None)
        metrics = [c for c in summary.columns
                   if c not in LABEL_COLUMNS and c not in KEY_COLUMNS
                   and pd.api.types.is_numeric_dtype(summary[c])]
        for row in summary.itertuples(index=False):
            values = row._asdict()
            label = values[label_column] if label_column else result.kind
            t = int(values['t']) if 't' in values else None
            for metric in metrics:
                value = float(values[metric])
                run.summaries.append(RunSummary(
                    label=label, seed=int(values['seed']), t=t, metric=metric,
                    value=None if pd.isna(value) else value))

        session.commit()
        return run.id
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()


def load_summaries(url, run_id):
    """Archived summary rows of one run as a DataFrame"""
    session = get_session(url)
    try:
        rows = session.query(RunSummary).filter_by(run_id=run_id).order_by(RunSummary.id).all()
        return pd.DataFrame([{
            'label': r.label, 'seed': r.seed, 't': r.t, 'metric': r.metric, 'value': r.value,
        } for r in rows])
    finally:
        session.close()
