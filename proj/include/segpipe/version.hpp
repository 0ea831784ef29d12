#pragma once

#define SEGPIPE_VERSION "0.1.0"
