#pragma once

#include <fstream>
#include <set>
#include <string>
#include <string_view>

#include "egoflux/error.hpp"

namespace egoflux {

// Built-in English stopword list, applied after phrase merging and before
// TF-IDF. Entries are in cleaned form (lowercase, apostrophes removed).
inline constexpr std::string_view kEnglishStopwords[] = {
    "a",          "about",     "above",    "across",    "after",     "afterwards", "again",     "against",
    "all",        "almost",    "alone",    "along",     "already",   "also",       "although",  "always",
    "am",         "among",     "amongst",  "an",        "and",       "another",    "any",       "anyhow",
    "anyone",     "anything",  "anyway",   "anywhere",  "are",       "arent",      "around",    "as",
    "at",         "be",        "became",   "because",   "become",    "becomes",    "becoming",  "been",
    "before",     "beforehand", "behind",  "being",     "below",     "beside",     "besides",   "between",
    "beyond",     "both",      "but",      "by",        "can",       "cannot",     "cant",      "could",
    "couldnt",    "did",       "didnt",    "do",        "does",      "doesnt",     "doing",     "done",
    "dont",       "down",      "due",      "during",    "each",      "either",     "else",      "elsewhere",
    "enough",     "etc",       "even",     "ever",      "every",     "everyone",   "everything", "everywhere",
    "except",     "few",       "for",      "former",    "formerly",  "from",       "further",   "had",
    "hadnt",      "has",       "hasnt",    "have",      "havent",    "having",     "he",        "hed",
    "hell",       "hence",     "her",      "here",      "hereafter", "hereby",     "herein",    "heres",
    "hers",       "herself",   "hes",      "him",       "himself",   "his",        "how",       "however",
    "hows",       "id",        "ie",       "if",        "im",        "in",         "indeed",    "into",
    "is",         "isnt",      "it",       "its",       "itself",    "ive",        "just",      "last",
    "latter",     "latterly",  "least",    "less",      "lets",      "ll",         "many",      "may",
    "me",         "meanwhile", "might",    "more",      "moreover",  "most",       "mostly",    "much",
    "must",       "mustnt",    "my",       "myself",    "namely",    "neither",    "never",     "nevertheless",
    "next",       "no",        "nobody",   "none",      "noone",     "nor",        "not",       "nothing",
    "now",        "nowhere",   "of",       "off",       "often",     "on",         "once",      "one",
    "only",       "onto",      "or",       "other",     "others",    "otherwise",  "ought",     "our",
    "ours",       "ourselves", "out",      "over",      "own",       "per",        "perhaps",   "rather",
    "re",         "same",      "shall",    "shant",     "she",       "shed",       "shell",     "shes",
    "should",     "shouldnt",  "since",    "so",        "some",      "somehow",    "someone",   "something",
    "sometime",   "sometimes", "somewhere", "still",    "such",      "than",       "that",      "thats",
    "the",        "their",     "theirs",   "them",      "themselves", "then",      "thence",    "there",
    "thereafter", "thereby",   "therefore", "therein",  "theres",    "thereupon",  "these",     "they",
    "theyd",      "theyll",    "theyre",   "theyve",    "this",      "those",      "though",    "through",
    "throughout", "thru",      "thus",     "to",        "together",  "too",        "toward",    "towards",
    "under",      "until",     "up",       "upon",      "us",        "ve",         "very",      "via",
    "was",        "wasnt",     "we",       "wed",       "well",      "were",       "werent",    "weve",
    "what",       "whatever",  "whats",    "when",      "whence",    "whenever",   "where",     "whereafter",
    "whereas",    "whereby",   "wherein",  "wheres",    "whereupon", "wherever",   "whether",   "which",
    "while",      "whither",   "who",      "whoever",   "whole",     "whom",       "whos",      "whose",
    "why",        "whys",      "will",     "with",      "within",    "without",    "wont",      "would",
    "wouldnt",    "yet",       "you",      "youd",      "youll",     "your",       "youre",     "yours",
    "yourself",   "yourselves", "youve",
};

inline const std::set<std::string>& default_stopwords() {
    static const std::set<std::string> words(std::begin(kEnglishStopwords), std::end(kEnglishStopwords));
    return words;
}

/// Reads a stopword file: one word per line, `#` starts a comment.
inline std::set<std::string> load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open stopword file: " + path);
    std::set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        words.insert(line.substr(b, e - b + 1));
    }
    return words;
}

}  // namespace egoflux
