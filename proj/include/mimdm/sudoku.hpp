#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "mimdm/errors.hpp"
#include "mimdm/rng.hpp"

namespace mimdm {

// Sudoku board with box size b (2 or 3): b^4 cells, digits 1..b^2, 0 = empty.
struct Board {
    int box_size = 0;
    std::vector<int> cells;

    Board() = default;
    Board(int b, std::vector<int> c) : box_size(b), cells(std::move(c)) {}

    static Board empty(int b) {
        return Board(b, std::vector<int>(static_cast<std::size_t>(b) * b * b * b, 0));
    }

    int side() const { return box_size * box_size; }
    int cell_count() const { return side() * side(); }

    int at(int r, int c) const { return cells[static_cast<std::size_t>(r) * side() + c]; }
    int& at(int r, int c) { return cells[static_cast<std::size_t>(r) * side() + c]; }

    bool complete() const {
        for (int v : cells)
            if (v == 0) return false;
        return true;
    }

    // no duplicate non-zero digit in any row, column, or box
    bool valid() const {
        const int n = side();
        const int b = box_size;
        std::vector<int> seen;
        auto dup_in_unit = [&](auto cell_of) {
            seen.assign(static_cast<std::size_t>(n) + 1, 0);
            for (int k = 0; k < n; ++k) {
                const int v = cell_of(k);
                if (v == 0) continue;
                if (v < 0 || v > n) return true;
                if (seen[static_cast<std::size_t>(v)]++) return true;
            }
            return false;
        };
        for (int r = 0; r < n; ++r)
            if (dup_in_unit([&](int k) { return at(r, k); })) return false;
        for (int c = 0; c < n; ++c)
            if (dup_in_unit([&](int k) { return at(k, c); })) return false;
        for (int br = 0; br < b; ++br)
            for (int bc = 0; bc < b; ++bc)
                if (dup_in_unit([&](int k) {
                        return at(br * b + k / b, bc * b + k % b);
                    }))
                    return false;
        return true;
    }
};

struct PuzzleRecord {
    Board clues;    // zeros at holes
    Board solution; // complete valid grid
};

namespace detail {

inline bool digit_fits(const Board& g, int r, int c, int v) {
    const int n = g.side();
    const int b = g.box_size;
    for (int k = 0; k < n; ++k)
        if (g.at(r, k) == v || g.at(k, c) == v) return false;
    const int r0 = (r / b) * b, c0 = (c / b) * b;
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < b; ++j)
            if (g.at(r0 + i, c0 + j) == v) return false;
    return true;
}

inline bool fill_from(Board& g, int cell, Rng& rng) {
    const int n = g.side();
    if (cell == g.cell_count()) return true;
    const int r = cell / n, c = cell % n;
    std::vector<int> digits(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) digits[static_cast<std::size_t>(v)] = v + 1;
    rng.shuffle(digits);
    for (int v : digits) {
        if (!digit_fits(g, r, c, v)) continue;
        g.at(r, c) = v;
        if (fill_from(g, cell + 1, rng)) return true;
        g.at(r, c) = 0;
    }
    return false;
}

} // namespace detail

// Randomized backtracking (shuffled candidate digits per cell); deterministic
// per seed. Always succeeds.
inline Board generate_complete_grid(int box_size, std::uint64_t seed) {
    if (box_size != 2 && box_size != 3) throw UsageError("box size must be 2 or 3");
    Board g = Board::empty(box_size);
    Rng rng(splitmix64(seed ^ 0x5d0cb0a4d5eed1ull));
    detail::fill_from(g, 0, rng);
    return g;
}

// Zero out exactly n_holes cells chosen uniformly without replacement.
inline PuzzleRecord punch_holes(const Board& solution, int n_holes, std::uint64_t seed) {
    const int n = solution.cell_count();
    if (n_holes < 0 || n_holes > n)
        throw UsageError("n_holes out of range: " + std::to_string(n_holes));
    PuzzleRecord rec{solution, solution};
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(splitmix64(seed ^ 0x9e3779b9ull));
    rng.shuffle(order);
    for (int i = 0; i < n_holes; ++i) rec.clues.cells[static_cast<std::size_t>(order[i])] = 0;
    return rec;
}

// true iff candidate is complete, satisfies all constraints, and matches
// every clue; any valid completion counts (no uniqueness requirement)
inline bool check_solution(const PuzzleRecord& puzzle, const Board& candidate) {
    if (candidate.box_size != puzzle.clues.box_size ||
        candidate.cells.size() != puzzle.clues.cells.size())
        throw ShapeError("check_solution: board shapes disagree");
    if (!candidate.complete() || !candidate.valid()) return false;
    for (std::size_t i = 0; i < candidate.cells.size(); ++i)
        if (puzzle.clues.cells[i] != 0 && candidate.cells[i] != puzzle.clues.cells[i])
            return false;
    return true;
}

// Line format: "<clues>,<solution>", b^4 digit characters each.
inline std::string format_puzzle_line(const PuzzleRecord& rec) {
    std::string out;
    out.reserve(rec.clues.cells.size() * 2 + 1);
    for (int v : rec.clues.cells) out.push_back(static_cast<char>('0' + v));
    out.push_back(',');
    for (int v : rec.solution.cells) out.push_back(static_cast<char>('0' + v));
    return out;
}

inline PuzzleRecord parse_puzzle_line(const std::string& line, int line_no = -1) {
    auto fail = [line_no](const std::string& why) -> PuzzleRecord {
        std::string where = line_no >= 0 ? " (line " + std::to_string(line_no) + ")" : "";
        throw DataError("puzzle parse error" + where + ": " + why);
    };

    const auto comma = line.find(',');
    if (comma == std::string::npos) return fail("missing ',' separator");
    const std::string clue_s = line.substr(0, comma);
    const std::string sol_s = line.substr(comma + 1);
    int b = 0;
    if (clue_s.size() == 16) b = 2;
    else if (clue_s.size() == 81) b = 3;
    else return fail("clue field has length " + std::to_string(clue_s.size()) +
                     ", expected 16 or 81");
    if (sol_s.size() != clue_s.size())
        return fail("solution field has length " + std::to_string(sol_s.size()) +
                    ", expected " + std::to_string(clue_s.size()));

    const int n = b * b;
    auto decode = [&](const std::string& s, Board& board) {
        board = Board::empty(b);
        for (std::size_t i = 0; i < s.size(); ++i) {
            const char ch = s[i];
            if (ch < '0' || ch > static_cast<char>('0' + n))
                fail(std::string("bad character '") + ch + "'");
            board.cells[i] = ch - '0';
        }
    };
    PuzzleRecord rec;
    decode(clue_s, rec.clues);
    decode(sol_s, rec.solution);

    if (!rec.solution.complete()) return fail("solution is incomplete");
    if (!rec.solution.valid()) return fail("solution violates sudoku constraints");
    for (std::size_t i = 0; i < rec.clues.cells.size(); ++i)
        if (rec.clues.cells[i] != 0 && rec.clues.cells[i] != rec.solution.cells[i])
            return fail("clue disagrees with solution at cell " + std::to_string(i));
    return rec;
}

// Dataset file: UTF-8 text, one puzzle per line, '#' starts a comment line.
inline std::vector<PuzzleRecord> read_puzzle_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open puzzle file: " + path);
    std::vector<PuzzleRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        out.push_back(parse_puzzle_line(line, line_no));
    }
    return out;
}

inline void write_puzzle_file(const std::string& path,
                              const std::vector<PuzzleRecord>& records,
                              const std::string& comment = "") {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    if (!comment.empty()) out << "# " << comment << "\n";
    for (const auto& rec : records) out << format_puzzle_line(rec) << "\n";
    if (!out) throw DataError("write failed: " + path);
}

} // namespace mimdm
