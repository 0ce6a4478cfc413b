"""create experiment_run

Revision ID: 3c1d9e2a7b40
Revises:
Create Date: 2026-10-18 10:12:40.118402

"""
from typing import Sequence, Union

from alembic import op
import sqlalchemy as sa


# revision identifiers, used by Alembic.
revision: str = '3c1d9e2a7b40'
down_revision: Union[str, Sequence[str], None] = None
branch_labels: Union[str, Sequence[str], None] = None
depends_on: Union[str, Sequence[str], None] = None


def upgrade() -> None:
    """Upgrade schema."""
    op.create_table('experiment_run',
    sa.Column('config_digest', sa.String(length=64), nullable=False),
    sa.Column('tool_version', sa.String(), nullable=False),
    sa.Column('master_seed', sa.String(length=20), nullable=False),
    sa.Column('functional_id', sa.String(), nullable=False),
    sa.Column('family_kind', sa.String(), nullable=False),
    sa.Column('n', sa.Integer(), nullable=False),
    sa.Column('m', sa.Integer(), nullable=False),
    sa.Column('output_dir', sa.String(), nullable=False),
    sa.Column('duration_seconds', sa.Float(), nullable=False),
    sa.Column('predicted_mean', sa.Float(), nullable=False),
    sa.Column('predicted_variance', sa.Float(), nullable=False),
    sa.Column('empirical_mean', sa.Float(), nullable=False),
    sa.Column('empirical_variance', sa.Float(), nullable=False),
    sa.Column('ks_statistic', sa.Float(), nullable=True),
    sa.Column('ks_pvalue', sa.Float(), nullable=True),
    sa.Column('degenerate', sa.Boolean(), nullable=False),
    sa.Column('report_json', sa.Text(), nullable=False),
    sa.Column('id', sa.UUID(), nullable=False),
    sa.Column('created_at', sa.DateTime(timezone=True), nullable=False),
    sa.Column('updated_at', sa.DateTime(timezone=True), nullable=False),
    sa.PrimaryKeyConstraint('id')
    )
    op.create_index(op.f('ix_experiment_run_config_digest'), 'experiment_run', ['config_digest'], unique=False)
    op.create_index(op.f('ix_experiment_run_id'), 'experiment_run', ['id'], unique=False)


def downgrade() -> None:
    """Downgrade schema."""
    op.drop_index(op.f('ix_experiment_run_id'), table_name='experiment_run')
    op.drop_index(op.f('ix_experiment_run_config_digest'), table_name='experiment_run')
    op.drop_table('experiment_run')
