"""
SQLite Run History
Records every analysis command with its config hash, exit code, output
location and timings.
"""

import hashlib
import json
import sqlite3
from pathlib import Path
from typing import Dict, List, Optional


def config_hash(config_json: str) -> str:
    return hashlib.sha256(config_json.encode("utf-8")).hexdigest()[:16]


class RunStore:
    def __init__(self, db_path: str):
        self.db_path = Path(db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self.init_db()

    def init_db(self):
        """Initialize database schema."""
        conn = sqlite3.connect(str(self.db_path))
        cursor = conn.cursor()

        cursor.execute('''
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                command TEXT NOT NULL,
                system TEXT NOT NULL,
                config_hash TEXT NOT NULL,
                exit_code INTEGER NOT NULL,
                output TEXT,
                timings TEXT NOT NULL,
                created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
            )
        ''')

        conn.commit()
        conn.close()

    def record_run(self, command: str, system: str, config_json: str, exit_code: int,
                   output: Optional[str] = None, timings: Optional[Dict[str, float]] = None) -> int:
        conn = sqlite3.connect(str(self.db_path))
        cursor = conn.cursor()

        cursor.execute('''
            INSERT INTO runs (command, system, config_hash, exit_code, output, timings)
            VALUES (?, ?, ?, ?, ?, ?)
        ''', (command, system, config_hash(config_json), exit_code, output,
              json.dumps(timings or {}, sort_keys=True)))
        run_id = cursor.lastrowid

        conn.commit()
        conn.close()
        return run_id

    def get_runs(self, limit: int = 20) -> List[Dict]:
        """Most recent runs first."""
        conn = sqlite3.connect(str(self.db_path))
        cursor = conn.cursor()

        cursor.execute('''
            SELECT id, command, system, config_hash, exit_code, output, timings, created_at
            FROM runs
            ORDER BY id DESC
            LIMIT ?
        ''', (limit,))
        rows = cursor.fetchall()
        conn.close()

        return [
            {
                'id': row[0],
                'command': row[1],
                'system': row[2],
                'config_hash': row[3],
                'exit_code': row[4],
                'output': row[5],
                'timings': json.loads(row[6]),
                'created_at': row[7],
            }
            for row in rows
        ]

    def clear_history(self):
        conn = sqlite3.connect(str(self.db_path))
        cursor = conn.cursor()
        cursor.execute('DELETE FROM runs')
        conn.commit()
        conn.close()
