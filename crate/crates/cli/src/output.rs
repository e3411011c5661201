//! Trace and report emission: CSV traces, a gnuplot companion script, and
//! plain-text summary tables.

use std::io::Write;

use duio_core::sim::TraceSet;

use crate::error::CliError;

/// Writes one trace as CSV with the stable schema
/// `k,node,err_norm,x_hat_0..x_hat_{n_x-1}`: one row per (step, node).
pub fn write_trace_csv<W: Write>(out: W, trace: &TraceSet) -> Result<(), CliError> {
    let n_x = trace.records.first().map_or(0, |r| r.x.len());
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string(), "node".to_string(), "err_norm".to_string()];
    header.extend((0..n_x).map(|i| format!("x_hat_{i}")));
    writer.write_record(&header).map_err(csv_err)?;
    for record in &trace.records {
        for (node, (x_hat, err)) in record.x_hat.iter().zip(&record.err_norm).enumerate() {
            let mut row = vec![
                record.k.to_string(),
                node.to_string(),
                format_float(*err),
            ];
            row.extend(x_hat.iter().map(|v| format_float(*v)));
            writer.write_record(&row).map_err(csv_err)?;
        }
    }
    writer.flush().map_err(|e| CliError::Io {
        path: "<trace stream>".into(),
        source: e,
    })?;
    Ok(())
}

fn format_float(v: f64) -> String {
    // Shortest representation that round-trips; keeps files diffable.
    format!("{v}")
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io {
        path: "<trace stream>".into(),
        source: std::io::Error::other(e),
    }
}

/// Gnuplot script that plots every node's error norm from the CSV trace on
/// a logarithmic axis.
pub fn gnuplot_script(node_count: usize, csv_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key outside\n\
         set logscale y 10\n\
         set xlabel 'step k'\n\
         set ylabel 'estimation error norm'\n\
         plot for [n=0:{last}] '{csv_name}' using 1:($2 == n ? $3 : 1/0) \
         with lines title sprintf('node %d', n)\n",
        last = node_count.saturating_sub(1),
    )
}

/// Plain-text summary table: per-node steady-state RMS plus the global peak
/// and convergence step.
pub fn summary_table(trace: &TraceSet) -> String {
    let mut out = String::from("node  rms(last 10%)\n");
    for (i, rms) in trace.summary.rms_per_node.iter().enumerate() {
        out.push_str(&format!("{i:<5} {rms:.6e}\n"));
    }
    out.push_str(&format!("peak error      {:.6e}\n", trace.summary.peak_error));
    match trace.summary.convergence_step {
        Some(k) => out.push_str(&format!("converged at k = {k}\n")),
        None => out.push_str("never converged below threshold\n"),
    }
    out
}
