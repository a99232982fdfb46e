//! Minimal SMILES syntax check: allowed characters, balanced branches and
//! brackets, paired ring closures. Not a chemistry parser.

pub fn is_valid_smiles(s: &str) -> bool {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return false;
    }
    let chars: Vec<char> = s.chars().collect();
    let mut depth = 0i32;
    let mut open_rings = std::collections::BTreeSet::new();
    let mut i = 0;
    let mut atom_seen = false;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '[' => {
                let Some(end) = chars[i + 1..].iter().position(|&d| d == ']') else {
                    return false;
                };
                let inner = &chars[i + 1..i + 1 + end];
                if inner.is_empty() || inner.contains(&'[') || !inner.iter().any(|d| d.is_ascii_alphabetic()) {
                    return false;
                }
                atom_seen = true;
                i += end + 2;
                continue;
            }
            ']' => return false,
            '(' => {
                if !atom_seen {
                    return false;
                }
                depth += 1;
            }
            ')' => {
                depth -= 1;
                if depth < 0 || chars[i - 1] == '(' {
                    return false;
                }
            }
            '0'..='9' | '%' => {
                if !atom_seen {
                    return false;
                }
                let ring = if c == '%' {
                    let digits: String = chars.get(i + 1..i + 3).map(|d| d.iter().collect()).unwrap_or_default();
                    if digits.len() != 2 || !digits.chars().all(|d| d.is_ascii_digit()) {
                        return false;
                    }
                    i += 2;
                    digits.parse::<u32>().unwrap()
                } else {
                    c.to_digit(10).unwrap()
                };
                if !open_rings.remove(&ring) {
                    open_rings.insert(ring);
                }
            }
            '.' => atom_seen = false,
            '=' | '#' | '-' | '+' | '/' | '\\' | ':' | '@' | '$' => {}
            c if "BCNOPSFIbcnops".contains(c) => atom_seen = true,
            // two-letter organic-subset atoms
            'l' if i > 0 && chars[i - 1] == 'C' => {}
            'r' if i > 0 && chars[i - 1] == 'B' => {}
            '*' => atom_seen = true,
            _ => return false,
        }
        i += 1;
    }
    depth == 0 && open_rings.is_empty() && atom_seen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_common_forms() {
        for s in ["COCCOC", "C1COCO1", "[Li+].F[P-](F)(F)(F)(F)F", "CC#N", "[O-2].[Al+3]", "ClCCBr", "C%10CC%10"] {
            assert!(is_valid_smiles(s), "{s}");
        }
    }

    #[test]
    fn rejects_broken_forms() {
        for s in ["", "C1CC", "C(C", "CC)", "[Li", "Li]", "C()", "Xx", "(C)", "C .C", "[]"] {
            assert!(!is_valid_smiles(s), "{s:?}");
        }
    }
}
