class GTimingError(Exception):
    """Base class for all errors raised by :mod:`gtiming`.

    :meth:`to_dict` gives the machine-readable form written by the command line
    front end.
    """
    def __init__(self, message, **fields):
        super().__init__(message)
        self.message = message
        self.fields = fields

    def to_dict(self):
        return {'error': self.__class__.__name__, 'message': self.message, **self.fields}


class CohortParseError(GTimingError):
    def __init__(self, message, *, row, column):
        super().__init__(f'row {row}, column {column!r}: {message}', row=row, column=column)
        self.row = row
        self.column = column


class CohortValidationError(GTimingError):
    def __init__(self, violations):
        super().__init__(f'{len(violations)} invariant violation(s): ' + '; '.join(str(v) for v in violations[:5]),
                         violations=[str(v) for v in violations])
        self.violations = violations


class FitError(GTimingError):
    pass


class SeparationError(FitError):
    pass


class SingularDesignError(FitError):
    pass


class NoEventsError(FitError):
    pass


class NumericalError(FitError):
    pass


class NotConvergedError(FitError):
    pass


class MissingFieldError(FitError):
    def __init__(self, field):
        super().__init__(f'covariate field {field!r} not available', field=field)
        self.field = field


class EstimationError(GTimingError):
    pass


class PositivityError(EstimationError):
    def __init__(self, message, *, subject):
        super().__init__(f'{message} (subject {subject})', subject=int(subject))
        self.subject = subject


class NoConsistentSubjectsError(EstimationError):
    pass


class BootstrapDegenerateError(GTimingError):
    def __init__(self, n_failed, requested):
        super().__init__(f'{n_failed} of {requested} bootstrap replicates failed',
                         n_failed=n_failed, requested=requested)
        self.n_failed = n_failed
        self.requested = requested
