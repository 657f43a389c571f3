//! Pulling a runnable script out of a model reply.
//!
//! Decision table, applied in order:
//!
//! | reply contains                         | result                                 |
//! |----------------------------------------|----------------------------------------|
//! | one or more non-empty fenced blocks    | the largest block (an unclosed fence runs to the end) |
//! | >= 3 non-blank lines, >= 60% statement-like | the whole reply                   |
//! | 1-2 non-blank lines, all statement-like | the whole reply                       |
//! | anything else                          | none                                   |
//!
//! A line is statement-like when it is an import, a `def`/`class` header, an
//! assignment, a call, a Python control-flow line, a comment or decorator,
//! or a bracket continuation. Returned scripts have leading blank lines
//! removed and end in exactly one newline, so extracting from an extracted
//! script returns it unchanged.

use std::sync::LazyLock;

use regex::Regex;

static STATEMENT: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        r"^(import|from)\s+[A-Za-z_][\w.]*",
        r"^(async\s+)?def\s+[A-Za-z_]\w*\s*\(",
        r"^class\s+[A-Za-z_]\w*\s*[:(]",
        r"^[A-Za-z_][\w.]*(\[[^\]]*\])?(\s*,\s*[A-Za-z_][\w.]*(\[[^\]]*\])?)*\s*(\+|-|\*|/|//|%|\*\*|@|&|\||\^|>>|<<)?=[^=]",
        r"^[A-Za-z_][\w.]*\s*\(.*$",
        r"^(if|elif|while)\s.*:\s*(#.*)?$",
        r"^else\s*:\s*(#.*)?$",
        r"^for\s+.+\s+in\s+.+:\s*(#.*)?$",
        r"^(try|finally)\s*:\s*(#.*)?$",
        r"^except\b.*:\s*(#.*)?$",
        r"^with\s.+:\s*(#.*)?$",
        r"^(return|raise|yield|assert|del|global|nonlocal)\b",
        r"^(pass|break|continue)\s*$",
        r"^#",
        r"^@[A-Za-z_]",
        r"^[)\]}]+[,:)\]}]*\s*$",
        r#"^("""|''')"#,
        r"[(\[{,\\]\s*$",
    ]
    .iter()
    .map(|p| Regex::new(p).expect("static pattern"))
    .collect()
});

fn statement_like(line: &str) -> bool {
    let t = line.trim();
    STATEMENT.iter().any(|re| re.is_match(t))
}

/// Applies the plausible-code rule to a reply without fences.
pub fn looks_like_code(text: &str) -> bool {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let hits = lines.iter().filter(|l| statement_like(l)).count();
    match lines.len() {
        0 => false,
        n if n < 3 => hits == n,
        n => hits as f64 >= 0.6 * n as f64,
    }
}

fn normalize(text: &str) -> String {
    let body: Vec<&str> = text.lines().skip_while(|l| l.trim().is_empty()).collect();
    let mut out = body.join("\n").trim_end().to_string();
    out.push('\n');
    out
}

fn fence_open(line: &str) -> Option<(char, usize)> {
    let t = line.trim_start();
    let c = t.chars().next().filter(|c| *c == '`' || *c == '~')?;
    let n = t.chars().take_while(|x| *x == c).count();
    (n >= 3).then_some((c, n))
}

fn fence_close(line: &str, c: char, n: usize) -> bool {
    let t = line.trim();
    t.chars().count() >= n && t.chars().all(|x| x == c)
}

/// Contents of every fenced block, in order of appearance.
pub fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        if let Some((c, n)) = fence_open(line) {
            let mut body = Vec::new();
            for inner in lines.by_ref() {
                if fence_close(inner, c, n) {
                    break;
                }
                body.push(inner);
            }
            blocks.push(body.join("\n"));
        }
    }
    blocks
}

/// The script contained in `raw`, or `None` when the reply holds no code.
pub fn extract_code(raw: &str) -> Option<String> {
    let mut best: Option<String> = None;
    for block in fenced_blocks(raw) {
        if block.trim().is_empty() {
            continue;
        }
        if best.as_ref().is_none_or(|b| block.trim().len() > b.trim().len()) {
            best = Some(block);
        }
    }
    if let Some(block) = best {
        return Some(normalize(&block));
    }
    if fence_open_anywhere(raw) {
        return None;
    }
    looks_like_code(raw).then(|| normalize(raw))
}

fn fence_open_anywhere(raw: &str) -> bool {
    raw.lines().any(|l| fence_open(l).is_some())
}
