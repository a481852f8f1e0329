//! gnuplot scripts written next to each CSV. Run with `gnuplot -p <file>.gp`
//! from the output directory.

const HEADER: &str = "set datafile separator ','\nset key autotitle columnhead\nset grid\n";

pub fn loss(csv: &str) -> String {
    format!(
        "{HEADER}set xlabel 'epoch'\nset ylabel 'loss (nats)'\nset logscale y\n\
         plot '{csv}' using 1:2 with lines title 'training loss'\n"
    )
}

pub fn bler(csv: &str) -> String {
    format!(
        "{HEADER}set xlabel 'Eb/N0 (dB)'\nset ylabel 'BLER'\nset logscale y\n\
         plot '{csv}' using 1:($4 > 0 ? $4 : 1/0) with linespoints title 'BLER'\n"
    )
}

pub fn capacity(csv: &str) -> String {
    format!(
        "{HEADER}set xlabel 'Eb/N0 (dB)'\nset ylabel 'capacity (bits/s/Hz)'\n\
         plot '{csv}' using 1:2 with lines title 'capacity'\n"
    )
}

pub fn snr_study(files: &[(f64, String)]) -> String {
    let curves: Vec<String> = files
        .iter()
        .map(|(snr, name)| format!("'{name}' using 1:2 with lines title '{snr} dB'"))
        .collect();
    format!(
        "{HEADER}set xlabel 'epoch'\nset ylabel 'loss (nats)'\nset logscale y\nplot {}\n",
        curves.join(", \\\n     ")
    )
}

pub fn moments(csv: &str) -> String {
    format!(
        "{HEADER}set xlabel 'element i'\nset ylabel 'E[exp(u_i)]'\n\
         plot '{csv}' using 1:4 with points title 'closed form', \
         '' using 1:6 with points title 'Monte Carlo'\n"
    )
}
