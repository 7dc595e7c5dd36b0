//! Parsers for list-valued flags.

#[derive(Debug, Clone, PartialEq)]
pub struct F64List(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsizeList(pub Vec<usize>);

pub fn f64_list(s: &str) -> Result<F64List, String> {
    parse_f64_list(s).map(F64List)
}

pub fn usize_list(s: &str) -> Result<UsizeList, String> {
    parse_usize_list(s).map(UsizeList)
}

/// `a,b,c` or an inclusive `start:stop:step` range.
pub fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(format!("bad range {s:?}: need start <= stop and step > 0"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            // round away accumulated float error so 0.03:0.15:0.03 yields 0.09, not 0.09000000000000001
            Ok((0..=n)
                .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
                .collect())
        }
        [_] => s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
            .collect(),
        _ => Err(format!("bad list {s:?}: expected a,b,c or start:stop:step")),
    }
}

pub fn parse_usize_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_lists() {
        assert_eq!(
            parse_f64_list("0.03:0.15:0.03").unwrap(),
            vec![0.03, 0.06, 0.09, 0.12, 0.15]
        );
        assert_eq!(parse_f64_list("0.1,0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_f64_list("1:0:1").is_err());
        assert!(parse_f64_list("a").is_err());
        assert_eq!(parse_usize_list("2,4, 8").unwrap(), vec![2, 4, 8]);
    }
}
