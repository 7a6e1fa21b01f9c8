#!/usr/bin/env node
/** pose-bridge CLI: stream kp17 frames from a pose source to a ground
 * station over REQ/REP.
 *
 *   pose-bridge --source synthetic|path.json|<device> --connect HOST:PORT \
 *               --cam-id cam0 [--fps 30] [--duration 10] [--conf-floor 0] \
 *               [--width 640] [--height 480] [--lockstep]
 */

import { runBridge } from "./bridge.js";
import {
  Detector,
  JsonReplay,
  SyntheticWalker,
  createLiveDetector,
} from "./detectors.js";

interface Args {
  source: string;
  connect: string;
  camId: string;
  fps: number;
  duration: number;
  confFloor: number;
  width: number;
  height: number;
  lockstep: boolean;
}

function usage(message?: string): never {
  if (message) console.error(`error: ${message}`);
  console.error(
    "usage: pose-bridge --source synthetic|file.json|<device-index> " +
      "--connect HOST:PORT --cam-id ID [--fps N] [--duration S] " +
      "[--conf-floor C] [--width W] [--height H] [--lockstep]",
  );
  process.exit(2);
}

function parseArgs(argv: string[]): Args {
  const args: Args = {
    source: "", connect: "", camId: "",
    fps: 30, duration: 10, confFloor: 0,
    width: 640, height: 480, lockstep: false,
  };
  const takeValue = (flag: string, i: number): string => {
    const value = argv[i + 1];
    if (value === undefined) usage(`${flag} needs a value`);
    return value;
  };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    switch (flag) {
      case "--source": args.source = takeValue(flag, i); i++; break;
      case "--connect": args.connect = takeValue(flag, i); i++; break;
      case "--cam-id": args.camId = takeValue(flag, i); i++; break;
      case "--fps": args.fps = Number(takeValue(flag, i)); i++; break;
      case "--duration": args.duration = Number(takeValue(flag, i)); i++; break;
      case "--conf-floor": args.confFloor = Number(takeValue(flag, i)); i++; break;
      case "--width": args.width = Number(takeValue(flag, i)); i++; break;
      case "--height": args.height = Number(takeValue(flag, i)); i++; break;
      case "--lockstep": args.lockstep = true; break;
      case "--help": case "-h": usage(); break;
      default: usage(`unknown flag ${flag}`);
    }
  }
  if (!args.source) usage("--source is required");
  if (!args.connect.includes(":")) usage("--connect needs HOST:PORT");
  if (!args.camId) usage("--cam-id is required");
  if (!(args.fps > 0) || !(args.duration > 0)) usage("fps/duration must be > 0");
  return args;
}

function buildDetector(source: string, width: number, height: number): Detector {
  if (source === "synthetic") return new SyntheticWalker(width, height);
  if (source.endsWith(".json")) return new JsonReplay(source);
  if (/^\d+$/.test(source)) return createLiveDetector(Number(source));
  usage(`--source must be "synthetic", a .json replay file, or a device index`);
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  const sep = args.connect.lastIndexOf(":");
  const host = args.connect.slice(0, sep);
  const port = Number(args.connect.slice(sep + 1));
  if (!host || !Number.isInteger(port)) usage("--connect needs HOST:PORT");

  const detector = buildDetector(args.source, args.width, args.height);
  try {
    const result = await runBridge(detector, {
      host, port,
      cameraId: args.camId,
      fps: args.fps,
      durationS: args.duration,
      width: args.width,
      height: args.height,
      confFloor: args.confFloor,
      lockstep: args.lockstep,
    });
    console.log(
      `delivered ${result.delivered}/${result.captured} frames` +
        (result.droppedAtSource
          ? ` (${result.droppedAtSource} dropped at source)`
          : ""),
    );
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  }
}

main();
