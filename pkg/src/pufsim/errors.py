"""Exception hierarchy shared by all pufsim modules."""


class PufError(Exception):
    """Base class for every error raised by pufsim."""


class LengthMismatch(PufError, ValueError):
    pass


class ChallengeNotForeseen(PufError, KeyError):
    """The challenge is not in the device's set of foreseen challenges."""

    def __str__(self):
        return Exception.__str__(self)


class IndexOutOfRange(PufError, IndexError):
    pass


class SampleTooSmall(PufError, ValueError):
    pass


class LengthNotDivisible(PufError, ValueError):
    pass


class OutLenTooLarge(PufError, ValueError):
    pass


class InsufficientData(PufError, ValueError):
    pass


class ParamsMismatch(PufError, ValueError):
    pass


class FamilyFileError(PufError, ValueError):
    """Malformed or unknown-field family parameter document."""


class NotEnoughChallenges(PufError, ValueError):
    pass


class StoreExhausted(PufError):
    pass


class UnknownChallenge(PufError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NotIssued(PufError):
    pass


class ProtocolError(PufError):
    pass


class MalformedFrame(ProtocolError):
    pass


class Timeout(ProtocolError, TimeoutError):
    pass
