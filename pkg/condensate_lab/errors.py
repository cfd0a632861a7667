"""
Errors Module - Exception types shared by the solvers and the CLI
"""


class LabError(Exception):
    """Base class for every failure the CLI maps to an exit code."""

    kind = 'lab_error'

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.message = message
        self.diagnostics = dict(diagnostics or {})

    def to_dict(self):
        doc = {'error': self.kind, 'message': self.message}
        if self.diagnostics:
            doc['diagnostics'] = self.diagnostics
        return doc


class ConfigError(LabError, ValueError):
    """Run document failed validation; `field` is the dotted path."""

    kind = 'config_invalid'

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field

    def to_dict(self):
        doc = super().to_dict()
        doc['field'] = self.field
        return doc


class DomainError(LabError, ValueError):
    kind = 'domain_error'


class GraphSpectrumError(LabError):
    kind = 'graph_spectrum_error'


class SpectrumError(LabError):
    kind = 'spectrum_error'


class SolverError(LabError):
    kind = 'solver_error'


class BracketError(SolverError):
    kind = 'bracket_error'
