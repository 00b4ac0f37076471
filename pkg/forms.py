import os

from wtforms import BooleanField, Form, IntegerField, SelectField, StringField
from wtforms.validators import DataRequired, NumberRange, Optional, ValidationError

from config import Config
from domains import STOCK_DOMAINS
from errors import ConfigError
from experiments import EXPERIMENTS, ExperimentConfig


class _Input(dict):
    """Multi-dict view of plain CLI/JSON values, as WTForms expects for form data."""

    def __init__(self, data):
        super().__init__()
        for key, value in data.items():
            if value is None or value is False:
                continue
            if value is True:
                value = 'y'
            elif isinstance(value, (list, tuple)):
                value = ','.join(str(v) for v in value)
            self[key] = str(value)

    def getlist(self, key):
        return [self[key]] if key in self else []


def parse_floats(text):
    return tuple(float(part) for part in str(text).split(',') if part.strip())


def float_list(form, field):
    """Comma-separated positive floats."""
    try:
        values = parse_floats(field.data)
    except ValueError:
        raise ValidationError('Must be a comma-separated list of numbers.')
    if not values or any(v <= 0.0 for v in values):
        raise ValidationError('Values must be positive.')


def decreasing_sequence(form, field):
    """Strictly decreasing, at least three entries, for slope fits."""
    float_list(form, field)
    values = parse_floats(field.data)
    if len(values) < 3:
        raise ValidationError('At least 3 mesh sizes are needed for slope fits.')
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ValidationError('Mesh sizes must be strictly decreasing.')


def known_domain(form, field):
    """Stock domain name or a readable domain file."""
    if field.data in STOCK_DOMAINS:
        return
    if not os.path.isfile(field.data):
        raise ValidationError(f'Unknown domain; use one of {", ".join(STOCK_DOMAINS)} or a domain file path.')


class ExperimentConfigForm(Form):
    """Experiment configuration from CLI options or a JSON config file"""
    experiment = SelectField('Experiment', choices=[(name, name) for name in EXPERIMENTS],
                             validators=[DataRequired()])
    domain = StringField('Domain', validators=[DataRequired(), known_domain])
    degree = IntegerField('Degree', validators=[DataRequired(), NumberRange(min=1, max=3)])
    hs = StringField('Mesh sizes', validators=[DataRequired(), decreasing_sequence])
    ts = StringField('Flow times', validators=[Optional(), float_list])
    seed = IntegerField('Seed', validators=[Optional(), NumberRange(min=0)])
    out = StringField('Output directory', validators=[Optional()])
    quadrature_degree = IntegerField('Quadrature degree', validators=[Optional()])
    method = SelectField('Solver', choices=[('cg', 'cg'), ('dense', 'dense')], default='cg')
    dump_matrix = BooleanField('Dump matrices')

    def validate_quadrature_degree(self, field):
        if field.data is not None and self.degree.data and field.data < 2 * self.degree.data + 2:
            raise ValidationError(f'Quadrature degree must be at least {2 * self.degree.data + 2}.')

    def validate_ts(self, field):
        if self.experiment.data != 'flow' or not field.data:
            return
        if any(t > Config.FLOW_DELTA for t in parse_floats(field.data)):
            raise ValidationError(f'Flow times must not exceed {Config.FLOW_DELTA}.')

    def to_config(self):
        config = ExperimentConfig(
            experiment=self.experiment.data,
            domain=self.domain.data,
            degree=self.degree.data,
            hs=parse_floats(self.hs.data),
            seed=self.seed.data,
            out=self.out.data or None,
            quadrature_degree=self.quadrature_degree.data,
            method=self.method.data or 'cg',
            dump_matrix=bool(self.dump_matrix.data),
        )
        if self.ts.data:
            config.ts = parse_floats(self.ts.data)
        return config


def validate_config(data):
    """ExperimentConfig from a plain dict; invalid input raises ConfigError with the form errors."""
    form = ExperimentConfigForm(_Input(data))
    if not form.validate():
        raise ConfigError(form.errors)
    return form.to_config()
