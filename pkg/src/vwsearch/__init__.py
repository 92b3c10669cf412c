"""Bag-of-visual-words image retrieval engine."""

from .errors import (
    ChecksumMismatchError,
    InvalidInputError,
    InvalidQueryError,
    NotFoundError,
    StorageError,
    VwsearchError,
)
from .image import GrayscaleImage, IntegralImage, box_sum, compute_integral_image, load_image
from .features import InterestPoint, detect_interest_points, hessian_response
from .vocabulary import (
    Dictionary,
    KdForest,
    assign_nearest_word,
    build_dictionary,
    compute_idf,
    load_dictionary,
    save_dictionary,
)
from .encoder import (
    ImageDescriptor,
    VisualWordOccurrence,
    descriptor_cosine,
    encode_image,
)
from .store import InvertedIndex
from .query import QuerySpec, RankedResult, Rect, region_query, whole_image_query, words_in_rects
from .evaluation import (
    EvalReport,
    Ranking,
    average_precision,
    mean_average_precision,
    precision_at,
    run_region_protocol,
    run_whole_image_report,
)

__version__ = "0.1.0"
