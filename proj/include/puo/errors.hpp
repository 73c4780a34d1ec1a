#pragma once

#include <stdexcept>

namespace puo {

// Base of every failure the library signals.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error { using Error::Error; };

// corpus
struct EmptySentence : Error { using Error::Error; };
struct EmptyVocabulary : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct IOFailure : Error { using Error::Error; };
struct EncodingFailure : Error { using Error::Error; };
struct FormatFailure : Error { using Error::Error; };

// embeddings
struct EmptyCorpus : Error { using Error::Error; };
struct NumericalFailure : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct UnknownToken : Error { using Error::Error; };
struct AllTokensUnknown : Error { using Error::Error; };

// augment
struct NoAugmentableToken : Error { using Error::Error; };
struct ConfigurationError : Error { using Error::Error; };

// models
struct DegenerateLabels : Error { using Error::Error; };

// eval
struct InvalidFoldCount : Error { using Error::Error; };
struct UnknownLabel : Error { using Error::Error; };
struct ValidationContaminated : Error { using Error::Error; };

}  // namespace puo
