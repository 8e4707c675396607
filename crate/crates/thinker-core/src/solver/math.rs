use num::{BigInt, BigRational, Integer, Signed, Zero};
use regex::Regex;
use std::sync::LazyLock;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MathError {
    #[error("malformed expression at byte {position}: expected {expected}")]
    Parse { position: usize, expected: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("the task cannot be turned into an arithmetic expression")]
    ExpressionInvalid,
}

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?").expect("valid pattern"));

/// Decimal literals in order of appearance, as written. Signs and units stay
/// behind; "37%" yields "37".
pub fn extract_numbers(text: &str) -> Vec<String> {
    NUMBER.find_iter(text).map(|m| m.as_str().to_owned()).collect()
}

/// Calculation shapes recognized directly from target phrasing, checked in
/// this order (first hit wins):
///
/// | pattern    | keywords                                          |
/// |------------|---------------------------------------------------|
/// | Count      | count, how many, number of                        |
/// | Difference | difference, subtract, minus                       |
/// | Min        | minimum, min, smallest, least, lowest             |
/// | Max        | maximum, max, largest, greatest, highest          |
/// | Sum        | total, sum, add, plus, altogether, combined       |
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MathPattern {
    Count,
    Difference,
    Min,
    Max,
    Sum,
}

static PATTERNS: LazyLock<[(MathPattern, Regex); 5]> = LazyLock::new(|| {
    let re = |words: &str| {
        Regex::new(&format!(r"(?i)\b(?:{words})\b")).expect("valid pattern")
    };
    [
        (MathPattern::Count, re("count|how many|number of")),
        (MathPattern::Difference, re("difference|subtract|minus")),
        (MathPattern::Min, re("minimum|min|smallest|least|lowest")),
        (MathPattern::Max, re("maximum|max|largest|greatest|highest")),
        (MathPattern::Sum, re("total|sum|add|plus|altogether|combined")),
    ]
});

pub fn detect_pattern(target: &str) -> Option<MathPattern> {
    PATTERNS.iter().find(|(_, re)| re.is_match(target)).map(|(p, _)| *p)
}

/// Deterministic evaluation when the target matches a known pattern, or the
/// identity when a single number and no pattern are present. `None` defers
/// to the expression-generation path.
pub fn deterministic_math(
    numbers: &[String],
    target: &str,
) -> Option<Result<BigRational, MathError>> {
    let pattern = detect_pattern(target);
    match (pattern, numbers.len()) {
        (_, 0) => None,
        (Some(MathPattern::Count), n) => Some(Ok(BigRational::from_integer(BigInt::from(n)))),
        // Additive patterns reuse the expression evaluator so both paths
        // agree by construction.
        (Some(MathPattern::Sum), _) => Some(eval_expression(&numbers.join("+"))),
        (Some(MathPattern::Difference), _) => Some(eval_expression(&numbers.join("-"))),
        (Some(MathPattern::Min), _) | (Some(MathPattern::Max), _) => {
            let parsed: Result<Vec<BigRational>, MathError> =
                numbers.iter().map(|n| eval_expression(n)).collect();
            Some(parsed.map(|values| {
                let pick = values.into_iter();
                match pattern {
                    Some(MathPattern::Min) => pick.min(),
                    _ => pick.max(),
                }
                .expect("nonempty by the length guard")
            }))
        }
        (None, 1) => Some(eval_expression(&numbers[0])),
        (None, _) => None,
    }
}

/// Exact evaluation of `+ - * /` expressions with parentheses and unary
/// minus over arbitrary-precision rationals.
pub fn eval_expression(expr: &str) -> Result<BigRational, MathError> {
    let mut parser = ExprParser { src: expr, pos: 0 };
    parser.skip_ws();
    let value = parser.expr()?;
    parser.skip_ws();
    if parser.pos < parser.src.len() {
        return Err(parser.error("end of expression"));
    }
    Ok(value)
}

struct ExprParser<'a> {
    src: &'a str,
    pos: usize,
}

impl ExprParser<'_> {
    fn error(&self, expected: &str) -> MathError {
        MathError::Parse { position: self.pos, expected: expected.to_owned() }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<BigRational, MathError> {
        let mut value = self.term()?;
        loop {
            self.skip_ws();
            if self.eat('+') {
                value += self.term()?;
            } else if self.eat('-') {
                value -= self.term()?;
            } else {
                return Ok(value);
            }
        }
    }

    fn term(&mut self) -> Result<BigRational, MathError> {
        let mut value = self.unary()?;
        loop {
            self.skip_ws();
            if self.eat('*') {
                value *= self.unary()?;
            } else if self.eat('/') {
                let divisor = self.unary()?;
                if divisor.is_zero() {
                    return Err(MathError::DivisionByZero);
                }
                value /= divisor;
            } else {
                return Ok(value);
            }
        }
    }

    fn unary(&mut self) -> Result<BigRational, MathError> {
        self.skip_ws();
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<BigRational, MathError> {
        self.skip_ws();
        if self.eat('(') {
            let value = self.expr()?;
            self.skip_ws();
            if !self.eat(')') {
                return Err(self.error("`)`"));
            }
            return Ok(value);
        }
        self.number()
    }

    fn number(&mut self) -> Result<BigRational, MathError> {
        let digits = |p: &mut Self| {
            let start = p.pos;
            while p.peek().is_some_and(|c| c.is_ascii_digit()) {
                p.pos += 1;
            }
            p.src[start..p.pos].to_owned()
        };
        let whole = digits(self);
        if whole.is_empty() {
            return Err(self.error("a number"));
        }
        let frac = if self.eat('.') {
            let frac = digits(self);
            if frac.is_empty() {
                return Err(self.error("digits after the decimal point"));
            }
            frac
        } else {
            String::new()
        };
        let numer: BigInt =
            format!("{whole}{frac}").parse().expect("digit runs parse as integers");
        let denom = BigInt::from(10u8).pow(frac.len() as u32);
        Ok(BigRational::new(numer, denom))
    }
}

/// Fixed-point rendering with at most two decimals, half-away-from-zero
/// rounding, and trailing zeros trimmed: 4894.3 -> "4894.3", 592 -> "592",
/// 2.345 -> "2.35".
pub fn format_number(value: &BigRational) -> String {
    let cents = (value * BigRational::from_integer(BigInt::from(100))).round().to_integer();
    let sign = if cents.is_negative() { "-" } else { "" };
    let (whole, frac) = cents.abs().div_rem(&BigInt::from(100));
    if frac.is_zero() {
        return format!("{sign}{whole}");
    }
    let frac = format!("{:02}", frac);
    let frac = frac.trim_end_matches('0');
    format!("{sign}{whole}.{frac}")
}
