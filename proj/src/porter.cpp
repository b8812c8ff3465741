// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Porter stemmer. Follows Martin Porter's reference C implementation,
// including its two departures from the published algorithm ("bli" -> "ble"
// and "logi" -> "log" in step 2) and the short-word guard.

#include <algorithm>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

#include "prodsearch/text.hpp"

namespace prodsearch {
namespace {

class PorterStemmer {
  public:
    explicit PorterStemmer(std::string_view word) : m_b(word), m_k(static_cast<int>(word.size()) - 1) {}

    std::string run()
    {
        if (m_k <= 1) {
            return m_b;
        }
        step1ab();
        if (m_k > 0) {
            step1c();
            step2();
            step3();
            step4();
            step5();
        }
        return m_b.substr(0, static_cast<std::size_t>(m_k + 1));
    }

  private:
    using Rule = std::pair<std::string_view, std::string_view>;

    char at(int i) const { return m_b[static_cast<std::size_t>(i)]; }

    bool cons(int i) const
    {
        switch (at(i)) {
        case 'a': case 'e': case 'i': case 'o': case 'u': return false;
        case 'y': return i == 0 ? true : !cons(i - 1);
        default: return true;
        }
    }

    // Number of VC sequences in b[0..j].
    int measure() const
    {
        int n = 0;
        int i = 0;
        while (true) {
            if (i > m_j) return n;
            if (!cons(i)) break;
            ++i;
        }
        ++i;
        while (true) {
            while (true) {
                if (i > m_j) return n;
                if (cons(i)) break;
                ++i;
            }
            ++i;
            ++n;
            while (true) {
                if (i > m_j) return n;
                if (!cons(i)) break;
                ++i;
            }
            ++i;
        }
    }

    bool vowel_in_stem() const
    {
        for (int i = 0; i <= m_j; ++i) {
            if (!cons(i)) return true;
        }
        return false;
    }

    bool double_cons(int j) const
    {
        if (j < 1) return false;
        if (at(j) != at(j - 1)) return false;
        return cons(j);
    }

    bool cvc(int i) const
    {
        if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
        char ch = at(i);
        return !(ch == 'w' || ch == 'x' || ch == 'y');
    }

    bool ends(std::string_view s)
    {
        int len = static_cast<int>(s.size());
        if (len > m_k + 1) return false;
        if (std::string_view(m_b).substr(static_cast<std::size_t>(m_k - len + 1), s.size()) != s) return false;
        m_j = m_k - len;
        return true;
    }

    void set_to(std::string_view s)
    {
        m_b.replace(static_cast<std::size_t>(m_j + 1), std::string::npos, s);
        m_k = m_j + static_cast<int>(s.size());
    }

    void replace_if_measured(std::string_view s)
    {
        if (measure() > 0) set_to(s);
    }

    // First matching suffix wins, whether or not its measure condition holds.
    void apply_first(std::initializer_list<Rule> rules)
    {
        for (const auto& [suffix, repl] : rules) {
            if (ends(suffix)) {
                replace_if_measured(repl);
                return;
            }
        }
    }

    void step1ab()
    {
        if (at(m_k) == 's') {
            if (ends("sses")) {
                m_k -= 2;
            } else if (ends("ies")) {
                set_to("i");
            } else if (at(m_k - 1) != 's') {
                --m_k;
            }
        }
        if (ends("eed")) {
            if (measure() > 0) --m_k;
        } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
            m_k = m_j;
            m_b.resize(static_cast<std::size_t>(m_k + 1));
            if (ends("at")) {
                set_to("ate");
            } else if (ends("bl")) {
                set_to("ble");
            } else if (ends("iz")) {
                set_to("ize");
            } else if (double_cons(m_k)) {
                --m_k;
                char ch = at(m_k);
                if (ch == 'l' || ch == 's' || ch == 'z') ++m_k;
            } else {
                m_j = m_k;
                if (measure() == 1 && cvc(m_k)) {
                    set_to("e");
                }
            }
        }
    }

    void step1c()
    {
        if (ends("y") && vowel_in_stem()) {
            m_b[static_cast<std::size_t>(m_k)] = 'i';
        }
    }

    void step2()
    {
        switch (at(m_k - 1)) {
        case 'a': apply_first({{"ational", "ate"}, {"tional", "tion"}}); break;
        case 'c': apply_first({{"enci", "ence"}, {"anci", "ance"}}); break;
        case 'e': apply_first({{"izer", "ize"}}); break;
        case 'l':
            apply_first({{"bli", "ble"}, {"alli", "al"}, {"entli", "ent"}, {"eli", "e"}, {"ousli", "ous"}});
            break;
        case 'o': apply_first({{"ization", "ize"}, {"ation", "ate"}, {"ator", "ate"}}); break;
        case 's':
            apply_first({{"alism", "al"}, {"iveness", "ive"}, {"fulness", "ful"}, {"ousness", "ous"}});
            break;
        case 't': apply_first({{"aliti", "al"}, {"iviti", "ive"}, {"biliti", "ble"}}); break;
        case 'g': apply_first({{"logi", "log"}}); break;
        default: break;
        }
    }

    void step3()
    {
        switch (at(m_k)) {
        case 'e': apply_first({{"icate", "ic"}, {"ative", ""}, {"alize", "al"}}); break;
        case 'i': apply_first({{"iciti", "ic"}}); break;
        case 'l': apply_first({{"ical", "ic"}, {"ful", ""}}); break;
        case 's': apply_first({{"ness", ""}}); break;
        default: break;
        }
    }

    void step4()
    {
        bool matched = false;
        switch (at(m_k - 1)) {
        case 'a': matched = ends("al"); break;
        case 'c': matched = ends("ance") || ends("ence"); break;
        case 'e': matched = ends("er"); break;
        case 'i': matched = ends("ic"); break;
        case 'l': matched = ends("able") || ends("ible"); break;
        case 'n': matched = ends("ant") || ends("ement") || ends("ment") || ends("ent"); break;
        case 'o':
            matched = (ends("ion") && m_j >= 0 && (at(m_j) == 's' || at(m_j) == 't')) || ends("ou");
            break;
        case 's': matched = ends("ism"); break;
        case 't': matched = ends("ate") || ends("iti"); break;
        case 'u': matched = ends("ous"); break;
        case 'v': matched = ends("ive"); break;
        case 'z': matched = ends("ize"); break;
        default: break;
        }
        if (matched && measure() > 1) {
            m_k = m_j;
        }
    }

    void step5()
    {
        m_j = m_k;
        if (at(m_k) == 'e') {
            int a = measure();
            if (a > 1 || (a == 1 && !cvc(m_k - 1))) --m_k;
        }
        if (at(m_k) == 'l' && double_cons(m_k) && measure() > 1) --m_k;
    }

    std::string m_b;
    int m_k;
    int m_j = 0;
};

}  // namespace

std::string stem(std::string_view token)
{
    bool plain = std::all_of(token.begin(), token.end(), [](char c) { return c >= 'a' && c <= 'z'; });
    if (!plain || token.size() < 3) {
        return std::string(token);
    }
    return PorterStemmer(token).run();
}

}  // namespace prodsearch
