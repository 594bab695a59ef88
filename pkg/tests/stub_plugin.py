"""Minimal wire-protocol plugin used to exercise the host client.

Behaviour flags let tests drive failure modes:
  --version N        declare protocol version N in the handshake
  --silent-handshake never answer the hello message
  --bad-shape        reply with horizon+1 values
  --error-on-odd     reply an error message for odd sequence numbers
  --malformed-at N   emit a non-JSON line instead of the reply for seq N
  --echo-seq         reply [seq, seq, ...] instead of persistence
Default behaviour: persistence (last input value of the target channel,
repeated across the horizon).
"""

import argparse
import json
import sys


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--version", type=int, default=1)
    parser.add_argument("--silent-handshake", action="store_true")
    parser.add_argument("--bad-shape", action="store_true")
    parser.add_argument("--error-on-odd", action="store_true")
    parser.add_argument("--malformed-at", type=int, default=-1)
    parser.add_argument("--echo-seq", action="store_true")
    args = parser.parse_args()

    for line in sys.stdin:
        message = json.loads(line)
        if "hello" in message:
            if args.silent_handshake:
                continue
            reply = {
                "capabilities": {
                    "protocol_version": args.version,
                    "supports_future_covariates": True,
                    "model_size_bytes": 4096,
                }
            }
        elif "predict" in message:
            body = message["predict"]
            seq = body["seq"]
            horizon = body["layout"]["horizon"]
            if seq == args.malformed_at:
                print("this is not json")
                sys.stdout.flush()
                continue
            if args.error_on_odd and seq % 2 == 1:
                reply = {"error": {"seq": seq, "message": "odd sequence rejected"}}
            else:
                if args.echo_seq:
                    values = [float(seq)] * horizon
                else:
                    target_index = body["layout"]["target_index"]
                    values = [body["inputs"][-1][target_index]] * horizon
                if args.bad_shape:
                    values = values + [0.0]
                reply = {"prediction": {"seq": seq, "values": values}}
        else:
            reply = {"error": {"seq": -1, "message": "unknown message"}}
        print(json.dumps(reply))
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
