// Error types shared across the library.
#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace thermolm {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Input text could not be decoded as UTF-8.
class DecodeError : public Error {
public:
    DecodeError(std::size_t byte_offset, const std::string& what)
        : Error(what), byte_offset_(byte_offset) {}
    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

// Token collides with the reserved end glyph, or an unknown token was queried
// against a frozen vocabulary.
class VocabularyError : public Error {
public:
    using Error::Error;
};

// Two sentences (or a sentence and a model) disagree on their vocabulary.
class VocabularyMismatchError : public Error {
public:
    using Error::Error;
};

// An unsmoothed n-gram was queried with a context never seen in training.
class UnseenContextError : public Error {
public:
    UnseenContextError(std::vector<std::uint32_t> context, const std::string& what)
        : Error(what), context_(std::move(context)) {}
    const std::vector<std::uint32_t>& context() const { return context_; }

private:
    std::vector<std::uint32_t> context_;
};

// The generation chain does not reach the end token with probability 1.
class NonTerminatingError : public Error {
public:
    using Error::Error;
};

// Exhaustive enumeration would exceed its state budget.
class EnumerationBudgetError : public Error {
public:
    using Error::Error;
};

// Manifold constraint violations, spec mismatches, retraction blowups.
class ManifoldError : public Error {
public:
    using Error::Error;
};

// Malformed or out-of-contract model/serialization payloads.
class SerializationError : public Error {
public:
    using Error::Error;
};

}  // namespace thermolm
