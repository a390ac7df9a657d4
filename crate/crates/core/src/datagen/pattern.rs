//! Text pattern grammar.
//!
//! ```text
//! \d  digit        \l  lower-case letter   \u  upper-case letter
//! \w  letter or digit                      \x  literal x (any other char)
//! [a-z0-9_]        character class with ranges
//! (ab|cd|e)        alternation of sub-patterns
//! <list>           word from a built-in list (first, last, street, suffix, city, domain)
//! atom{n} / atom{m,n}  repetition, uniform in [m, n]
//! ```
//! Everything else is a literal character.

use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{Error, Result};

const FIRST: &[&str] = &[
    "James", "Mary", "Robert", "Patricia", "John", "Jennifer", "Michael", "Linda", "David",
    "Elizabeth", "William", "Barbara", "Richard", "Susan", "Joseph", "Jessica", "Thomas", "Sarah",
    "Carlos", "Karen", "Priya", "Wei", "Fatima", "Olga", "Kenji", "Amara", "Lucas", "Ingrid",
];
const LAST: &[&str] = &[
    "Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller", "Davis", "Rodriguez",
    "Martinez", "Hernandez", "Lopez", "Wilson", "Anderson", "Thomas", "Taylor", "Moore", "Jackson",
    "Nguyen", "Patel", "Kim", "Okafor", "Schmidt", "Rossi", "Tanaka", "Novak", "Silva", "Dubois",
];
const STREET: &[&str] = &[
    "Main", "Oak", "Pine", "Maple", "Cedar", "Elm", "Washington", "Lake", "Hill", "Park", "Sunset",
    "Highland", "Church", "Mill", "River", "Spring", "Ridge", "Forest", "Lincoln", "Madison",
];
const SUFFIX: &[&str] = &["St", "Ave", "Rd", "Blvd", "Ln", "Dr", "Ct", "Way", "Pl", "Ter"];
const CITY: &[&str] = &[
    "Springfield", "Riverside", "Franklin", "Greenville", "Bristol", "Clinton", "Fairview",
    "Salem", "Madison", "Georgetown", "Arlington", "Ashland", "Dover", "Oxford", "Milton",
];
const DOMAIN: &[&str] = &[
    "example.com", "mail.net", "post.org", "inbox.io", "corp.biz", "web.info", "home.us",
];

fn word_list(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        "first" => FIRST,
        "last" => LAST,
        "street" => STREET,
        "suffix" => SUFFIX,
        "city" => CITY,
        "domain" => DOMAIN,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Atom {
    Literal(char),
    Class(Vec<char>),
    Group(Vec<Vec<Item>>),
    Words(&'static [&'static str]),
}

#[derive(Debug, Clone, PartialEq)]
struct Item {
    atom: Atom,
    min: usize,
    max: usize,
}

/// A compiled text pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    source: String,
    items: Vec<Item>,
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    source: &'a str,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Config(format!("pattern {:?} at offset {}: {msg}", self.source, self.pos))
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<char> {
        let c = self.peek();
        self.pos += usize::from(c.is_some());
        c
    }

    /// Parses a sequence up to `|`, `)` or end of input.
    fn sequence(&mut self) -> Result<Vec<Item>> {
        let mut items = Vec::new();
        while let Some(c) = self.peek() {
            if c == '|' || c == ')' {
                break;
            }
            let atom = self.atom()?;
            let (min, max) = self.quantifier()?;
            items.push(Item { atom, min, max });
        }
        Ok(items)
    }

    fn atom(&mut self) -> Result<Atom> {
        match self.next().expect("peeked") {
            '\\' => {
                let c = self.next().ok_or_else(|| self.err("dangling escape"))?;
                Ok(match c {
                    'd' => Atom::Class(('0'..='9').collect()),
                    'l' => Atom::Class(('a'..='z').collect()),
                    'u' => Atom::Class(('A'..='Z').collect()),
                    'w' => Atom::Class(('0'..='9').chain('a'..='z').chain('A'..='Z').collect()),
                    other => Atom::Literal(other),
                })
            }
            '[' => {
                let mut set = BTreeSet::new();
                loop {
                    let c = self.next().ok_or_else(|| self.err("unterminated class"))?;
                    match c {
                        ']' => break,
                        '\\' => {
                            set.insert(self.next().ok_or_else(|| self.err("dangling escape"))?);
                        }
                        _ if self.peek() == Some('-') && self.chars.get(self.pos + 1).is_some_and(|&n| n != ']') => {
                            self.pos += 1;
                            let hi = self.next().expect("checked");
                            if hi < c {
                                return Err(self.err("reversed class range"));
                            }
                            set.extend(c..=hi);
                        }
                        _ => {
                            set.insert(c);
                        }
                    }
                }
                if set.is_empty() {
                    return Err(self.err("empty class"));
                }
                Ok(Atom::Class(set.into_iter().collect()))
            }
            '(' => {
                let mut alternatives = vec![self.sequence()?];
                loop {
                    match self.next() {
                        Some('|') => alternatives.push(self.sequence()?),
                        Some(')') => break,
                        _ => return Err(self.err("unterminated group")),
                    }
                }
                Ok(Atom::Group(alternatives))
            }
            '<' => {
                let mut name = String::new();
                loop {
                    match self.next() {
                        Some('>') => break,
                        Some(c) => name.push(c),
                        None => return Err(self.err("unterminated word list")),
                    }
                }
                word_list(&name)
                    .map(Atom::Words)
                    .ok_or_else(|| self.err(&format!("unknown word list <{name}>")))
            }
            ')' | '|' => Err(self.err("unbalanced group")),
            '{' => Err(self.err("quantifier without an atom")),
            c => Ok(Atom::Literal(c)),
        }
    }

    fn quantifier(&mut self) -> Result<(usize, usize)> {
        if self.peek() != Some('{') {
            return Ok((1, 1));
        }
        self.pos += 1;
        let mut body = String::new();
        loop {
            match self.next() {
                Some('}') => break,
                Some(c) => body.push(c),
                None => return Err(self.err("unterminated quantifier")),
            }
        }
        let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| self.err("malformed quantifier"));
        let (min, max) = match body.split_once(',') {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let n = parse(&body)?;
                (n, n)
            }
        };
        if min > max {
            return Err(self.err("quantifier minimum exceeds maximum"));
        }
        Ok((min, max))
    }
}

fn sample_items<R: Rng + ?Sized>(items: &[Item], rng: &mut R, out: &mut String) {
    for item in items {
        let reps = rng.random_range(item.min..=item.max);
        for _ in 0..reps {
            match &item.atom {
                Atom::Literal(c) => out.push(*c),
                Atom::Class(set) => out.push(set[rng.random_range(0..set.len())]),
                Atom::Group(alts) => sample_items(&alts[rng.random_range(0..alts.len())], rng, out),
                Atom::Words(words) => out.push_str(words[rng.random_range(0..words.len())]),
            }
        }
    }
}

fn min_len(items: &[Item]) -> usize {
    items
        .iter()
        .map(|item| {
            let one = match &item.atom {
                Atom::Literal(_) | Atom::Class(_) => 1,
                Atom::Group(alts) => alts.iter().map(|a| min_len(a)).min().unwrap_or(0),
                Atom::Words(words) => words.iter().map(|w| w.chars().count()).min().unwrap_or(0),
            };
            one * item.min
        })
        .sum()
}

fn collect_alphabet(items: &[Item], out: &mut BTreeSet<char>) {
    for item in items.iter().filter(|i| i.max > 0) {
        match &item.atom {
            Atom::Literal(c) => {
                out.insert(*c);
            }
            Atom::Class(set) => out.extend(set.iter().copied()),
            Atom::Group(alts) => alts.iter().for_each(|a| collect_alphabet(a, out)),
            Atom::Words(words) => words.iter().for_each(|w| out.extend(w.chars())),
        }
    }
}

fn regex_escape(c: char) -> String {
    regex::escape(&c.to_string())
}

fn write_regex(items: &[Item], out: &mut String) {
    for item in items {
        out.push_str("(?:");
        match &item.atom {
            Atom::Literal(c) => out.push_str(&regex_escape(*c)),
            Atom::Class(set) => {
                out.push('[');
                for &c in set {
                    out.push_str(&regex_escape(c));
                }
                out.push(']');
            }
            Atom::Group(alts) => {
                for (i, alt) in alts.iter().enumerate() {
                    if i > 0 {
                        out.push('|');
                    }
                    write_regex(alt, out);
                }
            }
            Atom::Words(words) => {
                let alts: Vec<String> = words.iter().map(|w| regex::escape(w)).collect();
                out.push_str(&alts.join("|"));
            }
        }
        out.push_str(&format!("){{{},{}}}", item.min, item.max));
    }
}

impl Pattern {
    pub fn parse(source: &str) -> Result<Self> {
        let mut p = Parser {
            chars: source.chars().collect(),
            pos: 0,
            source,
        };
        let items = p.sequence()?;
        if p.pos != p.chars.len() {
            return Err(p.err("unbalanced group"));
        }
        Ok(Self {
            source: source.to_string(),
            items,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> String {
        let mut out = String::new();
        sample_items(&self.items, rng, &mut out);
        out
    }

    /// Length in characters of the shortest string in the language.
    pub fn min_len(&self) -> usize {
        min_len(&self.items)
    }

    /// Every character the pattern can emit.
    pub fn alphabet(&self) -> BTreeSet<char> {
        let mut out = BTreeSet::new();
        collect_alphabet(&self.items, &mut out);
        out
    }

    /// Anchored regular expression accepting exactly the pattern's language.
    pub fn to_regex(&self) -> String {
        let mut out = String::from("^");
        write_regex(&self.items, &mut out);
        out.push('$');
        out
    }
}
