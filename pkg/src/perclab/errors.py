""" Exceptions raised by perclab """


class PercLabError(Exception):
    """ Base class of every perclab exception """


class GraphError(PercLabError, ValueError):
    """ Invalid host graph: bad parameters, malformed file, broken regularity """


class GraphSizeError(GraphError):
    """ Requested host exceeds a memory guard from the lab settings """


class InfeasibleGraphError(GraphError):
    """ No simple d-regular graph exists for the requested parameters """


class GenerationError(PercLabError, RuntimeError):
    """ Random generation gave up after the configured number of retries """


class SampleError(PercLabError, ValueError):
    """ Invalid percolation sample, probability or sample dump """


class ScheduleError(PercLabError, ValueError):
    """ Invalid pruning schedule parameters """


class TraceMismatchError(PercLabError, ValueError):
    """ A pruning trace was paired with a sample or schedule it was not produced from """


class WitnessError(PercLabError, ValueError):
    """ Witness requested for a vertex or round that does not qualify """


class NotBipartiteError(PercLabError, ValueError):
    """ The host graph has an odd cycle """


class ComponentTooLargeError(PercLabError, ValueError):
    """ A component exceeds the exhaustive matcher's size limit """


class BoundDomainError(PercLabError, ValueError):
    """ Parameters outside the validity range of an analytic bound """


class ConfigError(PercLabError, ValueError):
    """ Experiment configuration could not be parsed or validated """


class RegimeError(PercLabError, ValueError):
    """ A symbolic probability resolves outside [0, 1] for the chosen host """
