use misspec_harness::config::{parse_config, Algorithm, Source};
use misspec_harness::HarnessError;

fn line_of(err: HarnessError) -> usize {
    match err {
        HarnessError::Parse { line, .. } => line,
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn full_config_parses() {
    let text = "\
# grid for the design elimination
algorithm = design-elim
d = 3, 4
s = 1,2
epsilon = 0.05, 0.1
k = 16
seeds = 0..3, 10
master_seed = 7
noise = gaussian
kappa = 1.5
budget = 400
timing = true
output = out.csv
";
    let c = parse_config(text, "exp.cfg").unwrap();
    assert_eq!(c.algorithm, Algorithm::DesignElim);
    assert_eq!(c.source, Source::Random);
    assert_eq!(c.grid.d, vec![3, 4]);
    assert_eq!(c.grid.seeds, vec![0, 1, 2, 10]);
    assert_eq!(c.grid.epsilon, vec![0.05, 0.1]);
    assert!(c.noisy && c.timing && !c.include_truth);
    assert_eq!(c.constants.kappa, 1.5);
    assert_eq!(c.constants.budget, Some(400));
    assert_eq!(c.constants.c_const, 2.0);
    assert_eq!(c.master_seed, 7);
}

#[test]
fn errors_point_at_the_line() {
    assert_eq!(line_of(parse_config("algorithm = design-elim\n\nfoo = 1\n", "a").unwrap_err()), 3);
    assert_eq!(line_of(parse_config("algorithm = sorcery\n", "a").unwrap_err()), 1);
    assert_eq!(line_of(parse_config("algorithm = param-elim\nd = 3\nd = 4\n", "a").unwrap_err()), 3);
    assert_eq!(line_of(parse_config("algorithm = param-elim\n# c\nd = 3, x\n", "a").unwrap_err()), 3);
    assert_eq!(line_of(parse_config("algorithm = param-elim\nno equals sign\n", "a").unwrap_err()), 2);
    assert_eq!(line_of(parse_config("algorithm = param-elim\nfile = x.txt\n", "a").unwrap_err()), 2);
}

#[test]
fn config_errors_exit_with_one() {
    for text in ["d = 3\n", "algorithm = param-elim\nepsilon = 0\n", "algorithm = param-elim\nsource = file\n"] {
        assert_eq!(parse_config(text, "a").unwrap_err().exit_code(), 1, "{text}");
    }
}

#[test]
fn file_source_resolves_against_config_directory() {
    let c = parse_config("algorithm = design-elim\nsource = file\nfile = inst.txt\n", "/tmp/exp/run.cfg").unwrap();
    assert_eq!(c.source, Source::File("/tmp/exp/inst.txt".into()));
}
