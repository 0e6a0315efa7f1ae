"""Exception types shared across the handover toolkit.

Two broad families matter to callers: ``InputFormatError`` covers malformed
files and schema violations (CLI exit code 2), everything else derived from
``HandoverError`` is a semantic/validation failure (CLI exit code 1).
"""


class HandoverError(Exception):
    """Base class for all toolkit errors."""


class InputFormatError(HandoverError):
    """A file or payload does not conform to its declared format."""


# --- geometry ---------------------------------------------------------------

class DegenerateDirection(HandoverError):
    """A direction vector has (near-)zero length."""


class ParallelAxes(HandoverError):
    """Two axes that must span a plane are (near-)parallel."""


class NonUnitQuaternion(HandoverError):
    """Quaternion norm deviates from 1 beyond tolerance."""


# --- hand model --------------------------------------------------------------

class InvalidPoseBlock(HandoverError):
    """A per-joint 6D rotation block cannot be orthonormalized."""


class ModelMismatch(HandoverError):
    """Hand model and pose (or file contents) disagree on dimensions."""


class DegenerateNormal(HandoverError):
    """Palm keypoints are collinear; no normal can be derived."""


class AmbiguousHandedness(HandoverError):
    """Keypoint triple product too close to zero to classify the hand."""


# --- grasp selection ---------------------------------------------------------

class EmptyCandidateSet(HandoverError):
    """select_grasp called with no candidates."""


class NoCandidatesFound(HandoverError):
    """Antipodal sampling produced no valid pair."""


class InvalidCandidate(HandoverError):
    """Grasp candidate violates a hard constraint (e.g. jaw width)."""


# --- intent ------------------------------------------------------------------

class TemplateMismatch(HandoverError):
    """Model output does not follow the task-description template."""


class UnknownObject(HandoverError):
    """Parsed object name is not in the tool catalog."""


class NoObjectResolved(HandoverError):
    """Rule-based resolver found no catalog match in the text."""


class EmptyCorpus(HandoverError):
    """Evaluation corpus contains no items."""


class EndpointError(HandoverError):
    """Base class for remote-endpoint failures."""


class TransportError(EndpointError):
    """Connection-level failure (unreachable host, bad payload shape)."""


class EndpointTimeout(EndpointError):
    """Endpoint did not answer within the configured timeout."""


class NonSuccessStatus(EndpointError):
    """Endpoint answered with a non-2xx HTTP status."""

    def __init__(self, status: int, body: str = ""):
        super().__init__(f"endpoint returned HTTP {status}")
        self.status = status
        self.body = body


# --- pipeline ----------------------------------------------------------------

class ProviderEmpty(HandoverError):
    """A pose/grasp provider returned nothing for the request."""


class AllCandidatesCollide(HandoverError):
    """Every grasp candidate failed the gripper-hand clearance check."""

    def __init__(self, min_distances):
        self.min_distances = list(min_distances)
        super().__init__(
            "all %d candidates failed clearance (min distances: %s)"
            % (len(self.min_distances), self.min_distances)
        )


class HandednessMismatch(HandoverError):
    """Observed hand type differs from the planned receiving hand."""


class DegenerateObservation(HandoverError):
    """Observed keypoints are unusable (non-finite or collapsed)."""


# --- file formats ------------------------------------------------------------

class MalformedHeader(InputFormatError):
    """PLY header cannot be parsed."""


class UnsupportedEncoding(InputFormatError):
    """PLY encoding other than ascii / binary_little_endian."""


class SchemaError(InputFormatError):
    """JSON container violates its declared schema."""
