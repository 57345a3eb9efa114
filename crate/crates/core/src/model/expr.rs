//! Nested structure expressions such as `series(c1, parallel(c2, c3))`.

use crate::ugf::StructureFunction;

use super::StructureTree;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Expr {
    Leaf(String),
    Gate(StructureFunction, Vec<Expr>),
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '#' | '+' | ':')
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn expect(&mut self, want: char) -> Result<(), String> {
        match self.peek() {
            Some(c) if c == want => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(c) => Err(format!(
                "expected `{want}` at offset {}, found `{c}`",
                self.pos
            )),
            None => Err(format!("expected `{want}` at end of expression")),
        }
    }

    fn ident(&mut self) -> Result<String, String> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.src[self.pos..].chars().next() {
            if is_ident_char(c) {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        if start == self.pos {
            return Err(format!("expected a name at offset {start}"));
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn expr(&mut self) -> Result<Expr, String> {
        let name = self.ident()?;
        if self.peek() != Some('(') {
            return Ok(Expr::Leaf(name));
        }
        let w = match name.as_str() {
            "series" => StructureFunction::Series,
            "parallel" => StructureFunction::Parallel,
            "xor" => StructureFunction::Xor,
            other => {
                return Err(format!(
                    "unknown gate `{other}` (expected series, parallel or xor)"
                ))
            }
        };
        self.expect('(')?;
        let mut children = vec![self.expr()?];
        while self.peek() == Some(',') {
            self.expect(',')?;
            children.push(self.expr()?);
        }
        self.expect(')')?;
        Ok(Expr::Gate(w, children))
    }
}

pub(crate) fn parse_expr(src: &str) -> Result<Expr, String> {
    let mut p = Parser { src, pos: 0 };
    let e = p.expr()?;
    if let Some(c) = p.peek() {
        return Err(format!("unexpected `{c}` at offset {}", p.pos));
    }
    Ok(e)
}

impl Expr {
    /// Converts leaf names to input indices in order of appearance.
    pub(crate) fn into_tree(self) -> Result<(StructureTree, Vec<String>), String> {
        let mut names = Vec::new();
        let tree = self.build(&mut names)?;
        Ok((tree, names))
    }

    fn build(self, names: &mut Vec<String>) -> Result<StructureTree, String> {
        match self {
            Expr::Leaf(name) => {
                if names.contains(&name) {
                    return Err(format!("`{name}` appears more than once"));
                }
                names.push(name);
                Ok(StructureTree::Input(names.len() - 1))
            }
            Expr::Gate(w, children) => Ok(StructureTree::Gate(
                w,
                children
                    .into_iter()
                    .map(|c| c.build(names))
                    .collect::<Result<_, _>>()?,
            )),
        }
    }
}

/// Renders a tree back into expression syntax.
pub(crate) fn render(tree: &StructureTree, names: &[&str]) -> String {
    match tree {
        StructureTree::Input(i) => names[*i].to_string(),
        StructureTree::Gate(w, children) => {
            let inner: Vec<String> = children.iter().map(|c| render(c, names)).collect();
            format!("{}({})", w.name(), inner.join(", "))
        }
    }
}
