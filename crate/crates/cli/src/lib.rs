//! The `tdo` command-line tool.
//!
//! Every subcommand is a thin wrapper over one library operation. Verdicts
//! are printed as `check: <name> pass|fail` lines followed by `reason:`
//! lines, and summarised in the exit status.

mod commands;

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::CliError;

/// Default fuel for `vm-run` and VM-encoded blob decoding.
pub const DEFAULT_FUEL: u64 = 10_000_000;

/// Process exit status. The numeric values are part of the interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    /// Success, or an accepting verdict.
    Accept = 0,
    /// A verification, authenticity, replay or audit rejection.
    Reject = 1,
    /// Unknown subcommand or bad flags.
    Usage = 2,
    /// I/O failure, undecodable input or a structural violation.
    Failure = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputMode {
    /// Line-oriented `key: value` text.
    #[default]
    Text,
    /// Canonical TDO/1 report documents, where the command has one.
    Document,
}

#[derive(Debug, Parser)]
#[command(name = "tdo", version, about = "Pack, seal, verify and preserve trustworthy digital objects")]
pub struct Cli {
    #[command(flatten)]
    pub config: CliConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CliConfig {
    /// Trust store document; a missing file reads as an empty store.
    #[arg(long, global = true, env = "TDO_TRUST_STORE", default_value = "trust.tdo-store")]
    pub trust_store: PathBuf,
    /// Repository root; repeat for replicas. The first is the local store.
    #[arg(long = "repo", global = true, env = "TDO_REPO")]
    pub repos: Vec<PathBuf>,
    /// Instruction budget for VM runs.
    #[arg(long, global = true, default_value_t = DEFAULT_FUEL, value_parser = clap::value_parser!(u64).range(1..))]
    pub fuel: u64,
    /// Output file; `-` or absent writes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report format for commands that produce a report document.
    #[arg(long = "format", global = true, value_enum, default_value_t)]
    pub output_mode: OutputMode,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a signing key pair: secret key at PATH, public key at PATH.pub.
    Keygen {
        path: PathBuf,
        #[arg(long, default_value = "ed25519")]
        alg: String,
    },
    /// Register an institution's root key for one year in the trust store.
    RootAdd {
        #[arg(long)]
        institution: String,
        #[arg(long)]
        year: i32,
        /// Public (or secret) key file.
        #[arg(long)]
        key: PathBuf,
    },
    /// Register a directly shared peer key in the trust store.
    PeerAdd {
        #[arg(long)]
        name: String,
        #[arg(long)]
        key: PathBuf,
    },
    /// Issue a certificate. Omit --issuer-cert to self-attest a root.
    CertIssue {
        #[arg(long)]
        issuer_key: PathBuf,
        #[arg(long)]
        issuer_cert: Option<PathBuf>,
        #[arg(long)]
        subject_key: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long)]
        role: String,
        #[arg(long)]
        valid_from: NaiveDate,
        #[arg(long)]
        valid_to: NaiveDate,
    },
    /// Build an unsealed first version from files.
    Pack(PackArgs),
    /// Seal an unsealed object with a signing key and its certificate chain.
    Seal {
        input: PathBuf,
        #[arg(long)]
        key: PathBuf,
        /// Signer certificate.
        #[arg(long)]
        cert: PathBuf,
        /// Issuer certificates above the signer, leaf to root.
        #[arg(long = "issuer")]
        issuers: Vec<PathBuf>,
        #[arg(long)]
        date: NaiveDate,
    },
    /// Verify a sealed object offline against the trust store.
    Verify { input: PathBuf },
    /// Describe an object. Never rejects.
    Inspect { input: PathBuf },
    /// Start a new unsealed version from a sealed predecessor.
    Derive(DeriveArgs),
    /// Judge authenticity under a genre policy.
    Judge {
        input: PathBuf,
        #[arg(long)]
        policy: PathBuf,
    },
    /// Write a genre policy document.
    PolicyInit {
        #[arg(long)]
        genre: String,
        #[arg(long = "allow", required = true)]
        allowed_kinds: Vec<String>,
        #[arg(long = "require")]
        required_metadata: Vec<String>,
    },
    /// Assemble DEVM/1 source, or disassemble a binary program.
    VmAsm {
        input: PathBuf,
        #[arg(long)]
        disassemble: bool,
    },
    /// Run a program, or decode a VM-encoded blob of an object.
    VmRun {
        /// Program (source or binary), or an object when --blob is given.
        input: PathBuf,
        /// Program input bytes.
        #[arg(long)]
        input_file: Option<PathBuf>,
        /// Decode this VM-encoded blob of the object INPUT instead.
        #[arg(long)]
        blob: Option<String>,
        /// Write the emitted events as an events document.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Print the machine description, or its digest.
    VmSpec {
        #[arg(long)]
        digest: bool,
    },
    /// Check that two event streams are equal up to a constant time shift.
    ReplayCheck { expected: PathBuf, actual: PathBuf },
    /// Store sealed objects in the first repository.
    Ingest {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Fetch a version's sealed bytes from the first repository holding it.
    Get { version: String },
    /// List the stored versions of a work, oldest first.
    Resolve { work: String },
    /// Copy a version from the first repository to every other one.
    Replicate { version: String },
    /// Count verified replicas of a version across all repositories.
    Audit {
        version: String,
        #[arg(long, default_value_t = tdo::repository::DEFAULT_AUDIT_THRESHOLD)]
        threshold: usize,
    },
    /// Resolve every reference of a stored version; the first repository is local.
    ScanLinks { version: String },
}

#[derive(Debug, Args)]
pub struct PackArgs {
    /// Raw blob: NAME=PATH.
    #[arg(long = "blob")]
    pub blobs: Vec<String>,
    /// Media type hint for a blob: NAME=TYPE.
    #[arg(long = "media")]
    pub media: Vec<String>,
    /// Program blob assembled from DEVM/1 source: NAME=PATH.
    #[arg(long = "program")]
    pub programs: Vec<String>,
    /// VM-encoded blob: NAME=PATH@PROGRAM, where PROGRAM names a --program.
    #[arg(long = "encoded")]
    pub encoded: Vec<String>,
    /// Metadata: KEY=VALUE, or SCHEME:KEY=VALUE outside the built-in schema.
    #[arg(long = "meta")]
    pub meta: Vec<String>,
    #[arg(long)]
    pub creator: String,
    #[arg(long)]
    pub event: String,
}

#[derive(Debug, Args)]
pub struct DeriveArgs {
    /// Sealed predecessor.
    pub predecessor: PathBuf,
    #[command(flatten)]
    pub pack: PackArgs,
    #[arg(long, value_enum, default_value = "link")]
    pub mode: ModeArg,
    /// Transformation kind applied to the predecessor's blob.
    #[arg(long)]
    pub kind: String,
    /// Predecessor blob the transformation started from (default: the first).
    #[arg(long)]
    pub from: Option<String>,
    /// New blob the transformation produced (default: the first).
    #[arg(long)]
    pub to: Option<String>,
    #[arg(long)]
    pub agent: String,
    #[arg(long)]
    pub date: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Link,
    Nest,
}

/// Parse `argv` (including the program name) and run one subcommand.
pub fn run<I, T>(argv: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let status = if e.use_stderr() { ExitStatus::Usage } else { ExitStatus::Accept };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(rendered.as_bytes())
            } else {
                stdout.write_all(rendered.as_bytes())
            };
            return status;
        }
    };
    let mut io = commands::Io { stdin, stdout, stderr };
    match commands::dispatch(&cli, &mut io) {
        Ok(status) => status,
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            e.status()
        }
    }
}
