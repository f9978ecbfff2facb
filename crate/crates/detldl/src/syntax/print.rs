//! Term printer. Output re-parses to the same AST, with one cosmetic
//! exception: a doubled anti-domain prints as the test it denotes (`x?`),
//! which re-parses to an equivalent term.

use super::Term;

// Precedence levels: 0 preferential union, 1 composition, 2 prefix negations,
// 3 postfix operators, 4 atoms.
fn level(t: &Term) -> u8 {
    use Term::*;
    match t {
        PrefUnion(..) => 0,
        Compose(..) => 1,
        AntiDomain(inner) if matches!(**inner, AntiDomain(_)) => 3,
        AntiDomain(_) | AntiImage(_) => 2,
        MaxIterate(_) | Test(_) => 3,
        _ => 4,
    }
}

fn write_at(t: &Term, min: u8, out: &mut String) {
    let lv = level(t);
    if lv < min {
        out.push('(');
        write(t, out);
        out.push(')');
    } else {
        write(t, out);
    }
}

fn write(t: &Term, out: &mut String) {
    use Term::*;
    match t {
        Id => out.push_str("id"),
        Skip => out.push_str("skip"),
        Fail => out.push_str("fail"),
        Last => out.push_str("last"),
        AnyM => out.push_str("any"),
        Eps(m) | PropTest(m) | Ref(m) => out.push_str(m),
        Compose(a, b) => {
            write_at(a, 1, out);
            out.push_str(" ; ");
            write_at(b, 2, out);
        }
        PrefUnion(a, b) => {
            write_at(a, 0, out);
            out.push_str(" <+ ");
            write_at(b, 1, out);
        }
        AntiDomain(inner) => {
            if let AntiDomain(x) = &**inner {
                write_at(x, 4, out);
                out.push('?');
            } else {
                out.push('!');
                write_at(inner, 2, out);
            }
        }
        AntiImage(a) => {
            out.push('~');
            write_at(a, 2, out);
        }
        MaxIterate(a) => {
            write_at(a, 4, out);
            out.push('^');
        }
        Test(a) => {
            write_at(a, 4, out);
            out.push('?');
        }
        Converse(a) => {
            out.push_str("conv(");
            write(a, out);
            out.push(')');
        }
        Dom(a) => {
            out.push_str("dom(");
            write(a, out);
            out.push(')');
        }
        SelectEq(x, y, a) => {
            out.push_str("sel(");
            out.push_str(x);
            out.push_str(" = ");
            out.push_str(y);
            out.push_str(", ");
            write(a, out);
            out.push(')');
        }
        SelectNeq(x, y, a) => {
            out.push_str("sel(");
            out.push_str(x);
            out.push_str(" != ");
            out.push_str(y);
            out.push_str(", ");
            write(a, out);
            out.push(')');
        }
        Fresh(x, ys) => {
            out.push_str("fresh(");
            out.push_str(x);
            out.push_str("; ");
            out.push_str(&ys.join(", "));
            out.push(')');
        }
        Power(a, n) => {
            out.push_str("pow(");
            write(a, out);
            out.push_str(&format!(", {n}"));
            out.push(')');
        }
        Exists(f) => call1("E", f, out),
        Globally(f) => call1("G", f, out),
        BackExists(f) => call1("BE", f, out),
        BackGlobally(f) => call1("BG", f, out),
        IfThenElse(f, a, b) => {
            out.push_str("if(");
            write(f, out);
            out.push_str(", ");
            write(a, out);
            out.push_str(", ");
            write(b, out);
            out.push(')');
        }
        While(f, a) => call2("while", f, a, out),
        RepeatUntil(a, f) => call2("repeat", a, f, out),
        DiamondRight(a, f) => call2("dia", a, f, out),
        DiamondLeft(a, f) => call2("bdia", a, f, out),
        BoxRight(a, f) => call2("box", a, f, out),
        BoxLeft(a, f) => call2("bbox", a, f, out),
    }
}

fn call1(name: &str, a: &Term, out: &mut String) {
    out.push_str(name);
    out.push('(');
    write(a, out);
    out.push(')');
}

fn call2(name: &str, a: &Term, b: &Term, out: &mut String) {
    out.push_str(name);
    out.push('(');
    write(a, out);
    out.push_str(", ");
    write(b, out);
    out.push(')');
}

pub fn print_term(t: &Term) -> String {
    let mut out = String::new();
    write(t, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse_term;
    use super::*;

    #[test]
    fn round_trips_core_shapes() {
        for src in [
            "id",
            "a ; b ; c",
            "a <+ b ; c",
            "!a ; ~b",
            "(a <+ b)^",
            "sel(X = Y, id)",
            "sel(X != Y, a)",
            "fresh(P; O, E)",
            "conv(a ; b)",
            "pow(a, 3)",
            "while(p, a)",
            "E(sel(X = Y, id))",
        ] {
            let t = parse_term(src).unwrap();
            let printed = print_term(&t);
            assert_eq!(parse_term(&printed).unwrap(), t, "source `{src}` printed `{printed}`");
        }
    }

    #[test]
    fn double_antidomain_prints_as_test() {
        use Term::*;
        let t = AntiDomain(Box::new(AntiDomain(Box::new(Ref("p".into())))));
        assert_eq!(print_term(&t), "p?");
        let t3 = AntiDomain(Box::new(t));
        assert_eq!(print_term(&t3), "(!p)?");
    }
}
